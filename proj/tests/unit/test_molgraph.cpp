#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "graphdiff/dataset.hpp"
#include "graphdiff/error.hpp"
#include "graphdiff/fingerprint.hpp"
#include "graphdiff/smiles.hpp"
#include "graphdiff/tokens.hpp"
#include "helpers.hpp"

using namespace graphdiff;
using testing::isomorphic;

namespace {

const AtomVocab kStd = AtomVocab::standard();

MolecularGraph smi(const char *s) { return parse_smiles(s, kStd); }

int count_kind(const MolecularGraph &g, BondKind k) {
  int n = 0;
  for (const auto &b : g.bonds()) n += b.kind == k ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("vocab layout") {
  CHECK(kStd.symbol(kStd.pad()) == "PAD");
  CHECK(kStd.wildcard() >= 0);
  CHECK(kStd.info(kStd.wildcard()).valences == std::vector<int>{1, 2});
  std::set<std::string> seen;
  for (const auto &s : kStd.symbols()) CHECK(seen.insert(s).second);
  std::vector<std::string> sym = {"O", "C"};
  AtomVocab v = AtomVocab::from_symbols(sym);
  CHECK(v.symbols() == std::vector<std::string>{"C", "O", "*", "PAD"});
  CHECK(BondVocab::name(BondKind::kNone) == "none");
  CHECK(BondVocab::order(BondKind::kAromatic) == 1.5);
}

TEST_CASE("parse basic SMILES") {
  auto g = smi("C=O");
  CHECK(g.num_atoms() == 2);
  CHECK(g.bond_between(0, 1) == BondKind::kDouble);

  g = smi("*CC*");
  CHECK(g.num_atoms() == 4);
  CHECK(g.atom(0) == kStd.wildcard());
  CHECK(g.atom(3) == kStd.wildcard());
  CHECK(count_kind(g, BondKind::kSingle) == 3);

  g = smi("c1ccccc1");
  CHECK(g.num_atoms() == 6);
  CHECK(count_kind(g, BondKind::kAromatic) == 6);
  CHECK(ring_count(g) == 1);

  g = smi("CC(C)(C)C");
  CHECK(g.degree(1) == 4);
  g = smi("C%12CC%12");
  CHECK(ring_count(g) == 1);
  g = smi("[CH4]");
  CHECK(g.num_atoms() == 1);
  g = smi("C#N");
  CHECK(g.bond_between(0, 1) == BondKind::kTriple);
  g = smi("CC.O");
  CHECK(g.num_components() == 2);
}

TEST_CASE("malformed SMILES carry a position") {
  struct Case {
    const char *text;
    std::size_t pos;
  };
  // offending character offsets, counted by hand
  for (auto c : {Case{"C(C", 3}, Case{"CC)", 2}, Case{"C1CC", 1}, Case{"[NH4+]", 4}, Case{"C=", 1},
                 Case{"CXC", 1}, Case{"[13C]", 1}, Case{"C/C=C/C", 1}, Case{"c1cc1", 0}}) {
    CAPTURE(c.text);
    try {
      smi(c.text);
      FAIL("expected a syntax error");
    } catch (const SyntaxError &e) {
      CHECK(e.position() == c.pos);
    }
  }
  CHECK_THROWS_AS(smi(""), SyntaxError);
}

TEST_CASE("writer is canonical") {
  CHECK(write_smiles(smi("C"), kStd) == "C");
  Rng rng(11);
  auto corpus = testing::random_corpus(200, 5, kStd);
  for (const auto &g : corpus) {
    auto perm = testing::random_permutation(g.num_atoms(), rng);
    CHECK(write_smiles(g, kStd) == write_smiles(g.permuted(perm), kStd));
  }
  CHECK(write_smiles(smi("OCC"), kStd) == write_smiles(smi("CCO"), kStd));
  CHECK(write_smiles(smi("C1=CC=CC=C1"), kStd) != write_smiles(smi("c1ccccc1"), kStd));
}

TEST_CASE("round trip on a generated corpus") {
  auto corpus = testing::random_corpus(300, 17, kStd);
  int ok = 0;
  for (const auto &g : corpus) {
    auto back = parse_smiles(write_smiles(g, kStd), kStd);
    ok += isomorphic(g, back) ? 1 : 0;
  }
  CHECK(ok == 300);
}

TEST_CASE("edge-case file round trips") {
  std::ifstream in(GRAPHDIFF_TEST_DATA "/edge_cases.smi");
  REQUIRE(in);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    CAPTURE(line);
    auto g = smi(line.c_str());
    auto back = parse_smiles(write_smiles(g, kStd), kStd);
    CHECK(isomorphic(g, back));
    ++n;
  }
  CHECK(n >= 20);
}

TEST_CASE("isomorphism oracle sanity") {
  CHECK(isomorphic(smi("CCO"), smi("OCC")));
  CHECK_FALSE(isomorphic(smi("CCO"), smi("COC")));
  CHECK_FALSE(isomorphic(smi("C=CC"), smi("CCC")));
}

TEST_CASE("valence examples") {
  MolecularGraph g;
  int c = g.add_atom(kStd.index_of("C"));
  for (int k = 0; k < 4; ++k) g.add_bond(c, g.add_atom(kStd.index_of("F")), BondKind::kSingle);
  CHECK(is_valid(g, kStd));
  g.add_bond(c, g.add_atom(kStd.index_of("F")), BondKind::kSingle);
  CHECK_FALSE(is_valid(g, kStd));
  auto benzene = smi("c1ccccc1");
  auto rep = check_valence(benzene, kStd);
  CHECK(rep.valid);
  CHECK(rep.atoms[0].total_order == 3.0);
  CHECK(rep.atoms[0].implicit_h == 1);
  CHECK(is_valid(smi("c1ccc2ccccc2c1"), kStd));
  CHECK(is_valid(smi("*C(*)*"), kStd));
  CHECK_FALSE(is_valid(smi("C*(C)C"), kStd));
  auto split = check_valence(smi("CC.O"), kStd);
  CHECK(split.valid);
  CHECK_FALSE(split.connected);
}

// Independent oracle: an atom is fine when some count of implicit hydrogens
// (none for the wildcard) brings its bond-order total onto an allowed
// valence. Each aromatic bond may be read as single or double, with at most
// one double per atom.
TEST_CASE("valence agrees with exhaustive enumeration up to 4 atoms") {
  const std::vector<std::string> elems = {"C", "N", "O", "*", "S"};
  int checked = 0;
  for (int n = 1; n <= 4; ++n) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    }
    int n_elem = 1;
    for (int i = 0; i < n; ++i) n_elem *= static_cast<int>(elems.size());
    int n_bond = 1;
    for (std::size_t p = 0; p < pairs.size(); ++p) n_bond *= 5;
    for (int ea = 0; ea < n_elem; ea += (n == 4 ? 7 : 1)) {
      for (int ba = 0; ba < n_bond; ba += (n == 4 ? 3 : 1)) {
        MolecularGraph g;
        int code = ea;
        for (int i = 0; i < n; ++i, code /= static_cast<int>(elems.size()))
          g.add_atom(kStd.index_of(elems[code % elems.size()]));
        code = ba;
        for (auto [i, j] : pairs) {
          int k = code % 5;
          code /= 5;
          if (k) g.add_bond(i, j, BondVocab::kind(k));
        }
        bool expect = true;
        for (int i = 0; i < n; ++i) {
          int whole = 0, n_arom = 0;
          for (auto [j, kind] : g.neighbors(i)) {
            if (kind == BondKind::kAromatic) ++n_arom;
            else whole += BondVocab::half_order(kind) / 2;
          }
          std::vector<int> totals = {whole + n_arom};
          if (n_arom > 0) totals.push_back(whole + n_arom + 1);
          const auto &info = kStd.info(g.atom(i));
          bool ok = false;
          for (int total : totals) {
            for (int h = 0; h <= (info.implicit_h ? 8 : 0); ++h) {
              for (int v : info.valences) ok = ok || total + h == v;
            }
          }
          expect = expect && ok;
        }
        CHECK(is_valid(g, kStd) == expect);
        ++checked;
      }
    }
  }
  CHECK(checked > 10000);
}

TEST_CASE("connect_components") {
  Rng rng(3);
  auto g = smi("CCO");
  CHECK(connect_components(g, kStd, rng) == g);
  auto two = smi("CC.CO");
  auto joined = connect_components(two, kStd, rng);
  CHECK(joined.connected());
  CHECK(joined.num_bonds() == two.num_bonds() + 1);
  std::set<std::string> outcomes;
  for (int s = 0; s < 50; ++s) {
    Rng r(s);
    auto h = connect_components(smi("C.C.C"), kStd, r);
    CHECK(h.connected());
    CHECK(h.num_bonds() == 2);
    CHECK(is_valid(h, kStd));
    outcomes.insert(write_smiles(h, kStd));
  }
  CHECK(outcomes == std::set<std::string>{"CCC"});
  // a full atom cannot take a new bond while others can
  for (int s = 0; s < 20; ++s) {
    Rng r(s);
    auto h = connect_components(smi("CC(F)(F)F.C"), kStd, r);
    CHECK(is_valid(h, kStd));
  }
}

TEST_CASE("largest_component") {
  auto g = smi("CCO");
  CHECK(largest_component(g, kStd) == g);
  CHECK(largest_component(smi("CCC.CCCCC"), kStd).num_atoms() == 5);
  // equal atom counts: more bonds wins
  auto tie = largest_component(smi("CCC.C1CC1"), kStd);
  CHECK(tie.num_bonds() == 3);
  // equal atoms and bonds: smaller canonical string wins
  auto tie2 = largest_component(smi("CCO.CCC"), kStd);
  CHECK(write_smiles(tie2, kStd) == std::min(write_smiles(smi("CCO"), kStd), write_smiles(smi("CCC"), kStd)));
}

TEST_CASE("tokens") {
  AtomVocab v = AtomVocab::from_symbols(std::vector<std::string>{"C"});
  CHECK(v.size() == 3);
  GraphTokens t(3, 4);
  CHECK(t.f_g() == 19);
  auto x = to_tokens(parse_smiles("C.C", v), v, 3);
  for (int j = 0; j < 3; ++j) CHECK(x.edge(0, j) == 0);
  CHECK(x.satisfies_invariants());
  CHECK_THROWS_AS(to_tokens(smi("CCCC"), kStd, 3), SizeError);
  auto corpus = testing::random_corpus(200, 23, kStd);
  for (const auto &m : corpus) {
    auto tk = to_tokens(m, kStd, 16);
    CHECK(tk.satisfies_invariants());
    CHECK(from_tokens(tk) == m);
    auto dense = tk.dense();
    CHECK(GraphTokens::from_dense(dense, 16, kStd.size()) == tk);
  }
}

TEST_CASE("fingerprints and tanimoto") {
  auto a = fingerprint(smi("CCO"), kStd);
  CHECK(tanimoto(a, a) == 1.0);
  Fingerprint e1, e2;
  e1.words.assign(32, 0);
  e2.words.assign(32, 0);
  CHECK(tanimoto(e1, e2) == 1.0);
  e1.words[0] = 1;
  e2.words[1] = 1;
  CHECK(tanimoto(e1, e2) == 0.0);
  // CC has 2 distinct environments (C r0, C-C r1); CCC adds terminal and
  // middle variants: r0 {C deg1, C deg2}, r1 {end, middle}, r2 {end, middle}.
  auto ids_cc = circular_identifiers(smi("CC"), kStd, 2);
  auto ids_ccc = circular_identifiers(smi("CCC"), kStd, 2);
  std::set<std::uint64_t> s1(ids_cc.begin(), ids_cc.end()), s2(ids_ccc.begin(), ids_ccc.end());
  std::size_t both = 0;
  for (auto id : s1) both += s2.count(id);
  std::set<std::uint64_t> uni = s1;
  uni.insert(s2.begin(), s2.end());
  auto fa = fingerprint(smi("CC"), kStd), fb = fingerprint(smi("CCC"), kStd);
  double t = tanimoto(fa, fb);
  CHECK(t > 0.0);
  CHECK(t < 1.0);
  CHECK(t == doctest::Approx(static_cast<double>(both) / uni.size()));
  Rng rng(4);
  auto corpus = testing::random_corpus(40, 3, kStd);
  for (std::size_t i = 0; i + 1 < corpus.size(); ++i) {
    auto f1 = fingerprint(corpus[i], kStd), f2 = fingerprint(corpus[i + 1], kStd);
    CHECK(tanimoto(f1, f2) == tanimoto(f2, f1));
    CHECK(tanimoto(f1, f2) >= 0.0);
    CHECK(tanimoto(f1, f2) <= 1.0);
    auto perm = testing::random_permutation(corpus[i].num_atoms(), rng);
    CHECK(fingerprint(corpus[i].permuted(perm), kStd).words == f1.words);
  }
}

TEST_CASE("dataset loading") {
  std::string csv = "smiles,logp,kind\n";
  const char *mols[] = {"CCO", "CC", "c1ccccc1", "CN", "CCC", "C=O", "OCCO", "CCN", "C1CC1", "COC"};
  for (int i = 0; i < 10; ++i) csv += std::string(mols[i]) + "," + std::to_string(i * 0.5) + "," + (i % 2 ? "a" : "b") + "\n";
  Dataset d = load_dataset_text(csv, {}, 7);
  CHECK(d.records.size() == 10);
  CHECK(d.splits.train.size() == 6);
  CHECK(d.splits.valid.size() == 2);
  CHECK(d.splits.test.size() == 2);
  std::set<int> all;
  for (auto *s : {&d.splits.train, &d.splits.valid, &d.splits.test}) all.insert(s->begin(), s->end());
  CHECK(all.size() == 10);
  CHECK(d.specs.size() == 2);
  CHECK(d.specs[0].numeric());
  CHECK_FALSE(d.specs[1].numeric());
  Dataset again = load_dataset_text(csv, {}, 7);
  CHECK(again.splits.train == d.splits.train);

  std::string bad = csv + "C(C,1.0,a\n";
  Dataset e = load_dataset_text(bad, {}, 7);
  CHECK(e.records.size() == 10);
  REQUIRE(e.skipped.size() == 1);
  CHECK(e.skipped[0].row == 11);
  CHECK_THROWS_AS(load_dataset_text("name,x\nCC,1\n", {}, 0), SchemaError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.csv", {}, 0), IoError);

  auto j = dataset_to_json(d);
  Dataset back = dataset_from_json(j);
  CHECK(back.records.size() == d.records.size());
  CHECK(dataset_to_json(back) == j);
}

TEST_CASE("toy dataset") {
  ToySpec spec;
  spec.n_molecules = 100;
  spec.seed = 5;
  Dataset d = gen_toy_dataset(spec);
  CHECK(d.records.size() == 100);
  for (const auto &r : d.records) {
    CHECK(is_valid(r.graph, d.vocab));
    CHECK(r.graph.connected());
    CHECK(r.graph.num_atoms() <= spec.max_atoms);
  }
  AtomVocab v = d.vocab;
  CHECK(*synthetic_property("hetero_frac", parse_smiles("CCO", v), v) == doctest::Approx(1.0 / 3.0));
  CHECK(*synthetic_property("has_ring", parse_smiles("C1CC1", v), v) == 1.0);
  CHECK(*exact_oracle(d.specs[d.spec_index("has_ring")], parse_smiles("C1CC1", v), v) == 1.0);
  CHECK(*exact_oracle(d.specs[d.spec_index("has_ring")], parse_smiles("CCC", v), v) == 0.0);
  CHECK(dataset_to_json(gen_toy_dataset(spec)) == dataset_to_json(d));
  Dataset sub = with_conditions(d, {"has_ring"});
  CHECK(sub.specs.size() == 1);
  CHECK(sub.records[0].conditions.values.size() == 1);
  CHECK_THROWS_AS(with_conditions(d, {"nope"}), SchemaError);
}
