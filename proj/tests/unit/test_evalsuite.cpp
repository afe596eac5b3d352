#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "graphdiff/error.hpp"
#include "graphdiff/evalsuite.hpp"
#include "graphdiff/smiles.hpp"
#include "helpers.hpp"

using namespace graphdiff;

namespace {

const AtomVocab kStd = AtomVocab::standard();

std::vector<MolecularGraph> mols(std::initializer_list<const char *> smiles) {
  std::vector<MolecularGraph> out;
  for (const char *s : smiles) out.push_back(parse_smiles(s, kStd));
  return out;
}

}  // namespace

TEST_CASE("validity modes") {
  auto good = mols({"CCO", "c1ccccc1", "C=O"});
  CHECK(validity(good, kStd, Conversion::kAsIs) == 1.0);
  // pentavalent carbon stays invalid under every conversion
  auto bad = mols({"CCO", "C(C)(C)(C)(C)C"});
  CHECK(validity(bad, kStd, Conversion::kAsIs) == 0.5);
  CHECK(validity(bad, kStd, Conversion::kConnectAll) == 0.5);
  auto split = mols({"CC.O", "CCC"});
  CHECK(validity(split, kStd, Conversion::kAsIs) == 1.0);
  CHECK(validity(split, kStd, Conversion::kLcc) == 1.0);
  CHECK(validity({MolecularGraph{}}, kStd, Conversion::kAsIs) == 0.0);
  CHECK_THROWS_AS(validity({}, kStd, Conversion::kAsIs), EmptyInput);
}

TEST_CASE("coverage") {
  auto train = mols({"CCO", "CN", "C*"});
  auto cov = coverage(mols({"CC", "CO"}), train, kStd);
  CHECK(cov.found == 2);
  CHECK(cov.total == 3);
  CHECK(coverage(mols({"C*"}), train, kStd, true).total == 4);
}

TEST_CASE("diversity and fragment similarity") {
  auto same = mols({"CCO", "OCC", "CCO"});
  CHECK(internal_diversity(same, kStd) == 0.0);
  CHECK_THROWS_AS(internal_diversity(mols({"C"}), kStd), TooFew);
  auto set = mols({"CCO", "c1ccccc1", "CN"});
  double d = internal_diversity(set, kStd);
  // brute force over pairs
  double acc = 0.0;
  int pairs = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j, ++pairs)
      acc += tanimoto(fingerprint(set[i], kStd), fingerprint(set[j], kStd));
  CHECK(d == doctest::Approx(1.0 - acc / pairs));
  CHECK(fragment_similarity(set, set, kStd) == doctest::Approx(1.0));
  CHECK(fragment_similarity(mols({"C"}), mols({"O"}), kStd) == 0.0);
  double part = fragment_similarity(mols({"CCO"}), mols({"CCN"}), kStd);
  CHECK(part > 0.0);
  CHECK(part < 1.0);
  CHECK_THROWS_AS(fragment_similarity({}, set, kStd), EmptyInput);
}

TEST_CASE("descriptors") {
  auto d = descriptors(parse_smiles("c1ccccc1", kStd), kStd);
  CHECK(d == Descriptors{6, 6, 1, 1.0, 0.0, 2.0, 2, 0});
  auto e = descriptors(parse_smiles("*CC(=O)N", kStd), kStd);
  CHECK(e[0] == 5);
  CHECK(e[7] == 1);
  CHECK(e[4] == doctest::Approx(0.5));
}

TEST_CASE("frechet distance of gaussians") {
  Eigen::VectorXd m0(1), m1(1);
  m0 << 0.0;
  m1 << 1.0;
  Eigen::MatrixXd one(1, 1), four(1, 1);
  one << 1.0;
  four << 4.0;
  CHECK(frechet_gaussian(m0, one, m1, one) == doctest::Approx(1.0));
  CHECK(frechet_gaussian(m0, one, m0, four) == doctest::Approx(1.0));
  // diagonal covariances: closed form per coordinate
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd a(3), b(3);
    Eigen::MatrixXd sa = Eigen::MatrixXd::Zero(3, 3), sb = Eigen::MatrixXd::Zero(3, 3);
    double expect = 0.0;
    for (int i = 0; i < 3; ++i) {
      a(i) = rng.uniform();
      b(i) = rng.uniform();
      sa(i, i) = 0.1 + rng.uniform();
      sb(i, i) = 0.1 + rng.uniform();
      expect += (a(i) - b(i)) * (a(i) - b(i)) + std::pow(std::sqrt(sa(i, i)) - std::sqrt(sb(i, i)), 2);
    }
    CHECK(frechet_gaussian(a, sa, b, sb) == doctest::Approx(expect).epsilon(1e-9));
  }
  // rotation invariance of the full form
  Eigen::MatrixXd r = Eigen::MatrixXd::Random(3, 3);
  Eigen::MatrixXd s1 = r * r.transpose() + Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd s2 = s1 * 0.5 + Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
  CHECK(frechet_gaussian(z, s1, z, s1) < 1e-9);
  CHECK(frechet_gaussian(z, s1, z, s2) == doctest::Approx(frechet_gaussian(z, s2, z, s1)).epsilon(1e-8));
}

TEST_CASE("descriptor frechet") {
  auto corpus = testing::random_corpus(30, 5, kStd);
  auto shuffled = corpus;
  Rng rng(1);
  rng.shuffle(shuffled.begin(), shuffled.end());
  CHECK(descriptor_frechet(corpus, shuffled, kStd) == 0.0);
  auto other = testing::random_corpus(30, 6, kStd);
  CHECK(descriptor_frechet(corpus, other, kStd) > 0.0);
  CHECK_THROWS_AS(descriptor_frechet(mols({"C"}), corpus, kStd), TooFew);
}

TEST_CASE("condition error with the exact oracle") {
  ToySpec ts;
  ts.n_molecules = 20;
  Dataset d = gen_toy_dataset(ts);
  auto oracle = exact_oracle_for(d.specs, d.vocab);
  const int rc = d.spec_index("ring_count"), hr = d.spec_index("has_ring");
  std::vector<MolecularGraph> gen = {parse_smiles("C1CC1", d.vocab), parse_smiles("CCC", d.vocab)};
  std::vector<ConditionSet> targets(2, ConditionSet::null(d.specs.size()));
  targets[0].values[rc] = 1.0;
  targets[1].values[rc] = 1.0;
  targets[0].values[hr] = 1.0;
  targets[1].values[hr] = 1.0;
  auto scores = condition_error(gen, targets, d.specs, oracle);
  CHECK(scores[rc].value == doctest::Approx(0.5));
  CHECK(scores[rc].count == 2);
  CHECK(scores[hr].value == doctest::Approx(0.5));
  CHECK_FALSE(scores[hr].numeric);
  // null targets are skipped
  CHECK(scores[d.spec_index("hetero_frac")].count == 0);
  CHECK_THROWS_AS(condition_error(gen, {targets[0]}, d.specs, oracle), LengthMismatch);
}

TEST_CASE("knn oracle agrees with brute force") {
  auto fit = testing::random_corpus(60, 9, kStd);
  std::vector<double> y;
  for (const auto &g : fit) y.push_back(g.num_atoms() + 0.5 * ring_count(g));
  auto queries = testing::random_corpus(25, 10, kStd);
  for (int k : {1, 3, 7}) {
    auto reg = knn_fit(fit, y, k, false, kStd);
    std::vector<double> labels;
    for (double v : y) labels.push_back(static_cast<double>(static_cast<int>(v) % 3));
    auto cls = knn_fit(fit, labels, k, true, kStd);
    for (const auto &q : queries) {
      auto fq = fingerprint(q, kStd);
      std::vector<int> idx(fit.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::vector<double> sim;
      for (const auto &g : fit) sim.push_back(tanimoto(fq, fingerprint(g, kStd)));
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return sim[a] > sim[b]; });
      double num = 0, den = 0, plain = 0;
      std::map<double, int> votes;
      for (int r = 0; r < k; ++r) {
        num += sim[idx[r]] * y[idx[r]];
        den += sim[idx[r]];
        plain += y[idx[r]];
        votes[labels[idx[r]]] += 1;
      }
      double expect = den > 0 ? num / den : plain / k;
      CHECK(knn_predict(reg, q) == doctest::Approx(expect));
      int best = 0;
      for (auto &[l, c] : votes) best = std::max(best, c);
      double label = -1;
      for (int r = 0; r < k && label < 0; ++r)
        if (votes[labels[idx[r]]] == best) label = labels[idx[r]];
      CHECK(knn_predict(cls, q) == label);
    }
  }
  CHECK_THROWS_AS(knn_fit({}, {}, 1, false, kStd), EmptyFit);
  CHECK_THROWS_AS(knn_fit(fit, y, 0, false, kStd), RangeError);
  CHECK_THROWS_AS(knn_fit(fit, y, 61, false, kStd), RangeError);
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS_AS(median({}), EmptyInput);
}

TEST_CASE("evaluate a set against itself") {
  auto corpus = testing::random_corpus(20, 4, kStd);
  auto r = evaluate(corpus, corpus, corpus, {}, {}, {}, kStd, "none");
  CHECK(r.n_samples == 20);
  CHECK(r.validity == 1.0);
  CHECK(r.validity_no_rule == 1.0);
  CHECK(*r.fragment_similarity == doctest::Approx(1.0));
  CHECK(*r.descriptor_frechet == 0.0);
  CHECK(r.coverage.found == r.coverage.total);
  auto j = to_json(r);
  CHECK(j.contains("validity_no_rule"));
  CHECK_THROWS_AS(evaluate({}, corpus, corpus, {}, {}, {}, kStd, "none"), EmptyInput);
}

TEST_CASE("rank experiment bookkeeping") {
  ToySpec ts;
  ts.n_molecules = 40;
  ts.max_atoms = 6;
  Dataset d = gen_toy_dataset(ts);
  Dataset d1 = with_conditions(d, {"ring_count"}), d2 = with_conditions(d, {"hetero_frac"});
  Dataset dm = with_conditions(d, {"ring_count", "hetero_frac"});
  DenoiserConfig cfg;
  cfg.D = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.K = 2;
  NoiseConfig nc{4};
  Model m1 = make_model(d1, cfg, nc, 1), m2 = make_model(d2, cfg, nc, 2), mm = make_model(dm, cfg, nc, 3);
  std::vector<ConditionSet> cases;
  for (int k = 0; k < 3; ++k) cases.push_back(dm.records[dm.splits.test[k]].conditions);
  RankConfig rc;
  rc.n_per_condition = 6;
  auto r = rank_experiment({&m1, &m2}, mm, cases, exact_oracle_for(dm.specs, dm.vocab), rc);
  CHECK(r.names == std::vector<std::string>{"ring_count", "hetero_frac"});
  REQUIRE(r.ranks.size() == 2);
  for (const auto &row : r.ranks) {
    CHECK(row.size() == 3);
    for (int v : row) CHECK((v >= 1 && v <= 7));
  }
  for (int k : r.shared_k) CHECK((k >= 1 && k <= 6));
  CHECK(r.median_rank.size() == 2);
  auto again = rank_experiment({&m1, &m2}, mm, cases, exact_oracle_for(dm.specs, dm.vocab), rc);
  CHECK(again.ranks == r.ranks);
  CHECK(to_json(r)["conditions"]["ring_count"].contains("histogram"));
}
