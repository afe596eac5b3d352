#include "graphdiff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "graphdiff/error.hpp"
#include "graphdiff/smiles.hpp"

namespace graphdiff {

namespace {

using Row = std::vector<std::string>;

std::string trim(const std::string &s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// RFC-4180-ish: quoted fields may contain commas, doubled quotes and newlines.
std::vector<Row> parse_csv(const std::string &text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      row.push_back(trim(field));
      field.clear();
      any = true;
    } else if (ch == '\n') {
      row.push_back(trim(field));
      field.clear();
      if (any || !row.front().empty()) rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += ch;
      if (ch != '\r') any = true;
    }
  }
  if (quoted) throw SchemaError("unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(trim(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::optional<double> parse_number(const std::string &s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    return std::nullopt;
  }
  if (used != s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string lower(std::string s) {
  for (char &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Re-expresses `g` (indices into `from`) in the index space of `to`.
MolecularGraph remap_vocab(const MolecularGraph &g, const AtomVocab &from, const AtomVocab &to) {
  MolecularGraph out;
  for (int a : g.atoms()) out.add_atom(to.index_of(from.symbol(a)));
  for (const auto &b : g.bonds()) out.add_bond(b.a, b.b, b.kind);
  return out;
}

// Numeric ranges come from the training split.
void fit_ranges(Dataset &d) {
  for (std::size_t c = 0; c < d.specs.size(); ++c) {
    auto &spec = d.specs[c];
    if (!spec.numeric()) continue;
    double lo = INFINITY, hi = -INFINITY;
    for (int i : d.splits.train) {
      const auto &v = d.records[i].conditions.values[c];
      if (!v) continue;
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
    if (lo > hi) lo = 0.0, hi = 1.0;
    spec.lo = lo;
    spec.hi = hi;
  }
}

}  // namespace

std::vector<const Record *> Dataset::subset(const std::vector<int> &idx) const {
  std::vector<const Record *> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(&records.at(i));
  return out;
}

std::vector<double> Dataset::train_size_histogram() const {
  std::vector<double> hist(n_max + 1, 0.0);
  for (int i : splits.train) hist[records[i].graph.num_atoms()] += 1.0;
  return hist;
}

int Dataset::spec_index(const std::string &name) const {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

Splits split_indices(std::size_t n, std::uint64_t seed, double train, double valid) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, 0x5B117));
  rng.shuffle(idx.begin(), idx.end());
  auto n_train = static_cast<std::size_t>(std::llround(train * n));
  auto n_valid = static_cast<std::size_t>(std::llround(valid * n));
  n_train = std::min(n_train, n);
  n_valid = std::min(n_valid, n - n_train);
  Splits s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.valid.assign(idx.begin() + n_train, idx.begin() + n_train + n_valid);
  s.test.assign(idx.begin() + n_train + n_valid, idx.end());
  return s;
}

Dataset load_dataset_text(const std::string &csv, const LoadOptions &options, std::uint64_t seed) {
  std::vector<Row> rows = parse_csv(csv);
  if (rows.empty()) throw SchemaError("empty CSV");
  const Row &header = rows.front();
  int smiles_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (lower(header[c]) == "smiles") smiles_col = static_cast<int>(c);
  }
  if (smiles_col < 0) throw SchemaError("CSV has no 'smiles' column");

  // condition columns: given specs, or every other column with inferred kind
  std::vector<ConditionSpec> specs = options.specs;
  std::vector<int> cols;
  if (specs.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (static_cast<int>(c) == smiles_col) continue;
      if (header[c].empty()) throw SchemaError("empty column name in CSV header");
      ConditionSpec s;
      s.name = header[c];
      specs.push_back(s);
      cols.push_back(static_cast<int>(c));
      bool numeric = true;
      std::set<std::string> labels;
      for (std::size_t r = 1; r < rows.size(); ++r) {
        if (c >= rows[r].size() || rows[r][c].empty()) continue;
        labels.insert(rows[r][c]);
        if (!parse_number(rows[r][c])) numeric = false;
      }
      if (!numeric) {
        specs.back().kind = ConditionKind::kCategorical;
        specs.back().labels.assign(labels.begin(), labels.end());
        specs.back().cardinality = std::max<int>(2, static_cast<int>(labels.size()));
      }
    }
  } else {
    for (auto &s : specs) {
      auto it = std::find(header.begin(), header.end(), s.name);
      if (it == header.end()) throw SchemaError("CSV has no column '" + s.name + "'");
      cols.push_back(static_cast<int>(it - header.begin()));
      if (!s.numeric() && s.labels.empty()) {
        std::set<std::string> labels;
        for (std::size_t r = 1; r < rows.size(); ++r) {
          std::size_t c = cols.back();
          if (c < rows[r].size() && !rows[r][c].empty()) labels.insert(rows[r][c]);
        }
        s.labels.assign(labels.begin(), labels.end());
        s.cardinality = std::max({2, s.cardinality, static_cast<int>(labels.size())});
      }
    }
  }

  const AtomVocab standard = AtomVocab::standard();
  Dataset d;
  d.specs = specs;
  d.seed = seed;
  std::vector<Record> parsed;
  std::set<std::string> used;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const Row &row = rows[r];
    const int row_no = static_cast<int>(r);
    auto skip = [&](const std::string &why) { d.skipped.push_back({row_no, why}); };
    if (static_cast<int>(row.size()) <= smiles_col || row[smiles_col].empty()) {
      skip("missing smiles");
      continue;
    }
    Record rec;
    try {
      rec.graph = parse_smiles(row[smiles_col], standard);
    } catch (const Error &e) {
      skip(e.what());
      continue;
    }
    if (rec.graph.empty()) {
      skip("empty molecule");
      continue;
    }
    if (options.n_max > 0 && rec.graph.num_atoms() > options.n_max) {
      skip("molecule has " + std::to_string(rec.graph.num_atoms()) + " atoms, more than n_max " +
           std::to_string(options.n_max));
      continue;
    }
    rec.conditions = ConditionSet::null(specs.size());
    bool bad = false;
    for (std::size_t k = 0; k < specs.size() && !bad; ++k) {
      std::size_t c = cols[k];
      if (c >= row.size() || row[c].empty()) continue;
      if (specs[k].numeric()) {
        auto v = parse_number(row[c]);
        if (!v) {
          skip("non-numeric value '" + row[c] + "' for " + specs[k].name);
          bad = true;
        } else {
          rec.conditions.values[k] = *v;
        }
      } else {
        int idx = specs[k].label_index(row[c]);
        if (idx < 0) {
          skip("unknown label '" + row[c] + "' for " + specs[k].name);
          bad = true;
        } else {
          rec.conditions.values[k] = idx;
        }
      }
    }
    if (bad) continue;
    for (int a : rec.graph.atoms()) used.insert(standard.symbol(a));
    parsed.push_back(std::move(rec));
  }

  std::vector<std::string> symbols(used.begin(), used.end());
  d.vocab = AtomVocab::from_symbols(symbols);
  for (auto &rec : parsed) {
    MolecularGraph g = remap_vocab(rec.graph, standard, d.vocab);
    // store the canonical atom order so a reloaded bundle is identical
    rec.smiles = write_smiles(g, d.vocab);
    rec.graph = parse_smiles(rec.smiles, d.vocab);
    d.n_max = std::max(d.n_max, rec.graph.num_atoms());
    d.records.push_back(std::move(rec));
  }
  if (options.n_max > 0) d.n_max = options.n_max;
  d.splits = split_indices(d.records.size(), seed);
  fit_ranges(d);
  for (const auto &s : d.specs) s.validate();
  return d;
}

Dataset load_dataset(const std::filesystem::path &path, const LoadOptions &options,
                     std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_dataset_text(ss.str(), options, seed);
}

std::optional<double> synthetic_property(const std::string &name, const MolecularGraph &g,
                                         const AtomVocab &vocab) {
  if (name == "ring_count") return ring_count(g);
  if (name == "hetero_frac") return hetero_fraction(g, vocab);
  if (name == "has_ring") return ring_count(g) > 0 ? 1.0 : 0.0;
  if (name == "num_atoms") return g.num_atoms();
  return std::nullopt;
}

std::optional<double> exact_oracle(const ConditionSpec &spec, const MolecularGraph &g,
                                   const AtomVocab &vocab) {
  auto v = synthetic_property(spec.name, g, vocab);
  if (!v || spec.numeric()) return v;
  for (auto [no, yes] : {std::pair{"false", "true"}, std::pair{"0", "1"}}) {
    int i = spec.label_index(*v > 0.5 ? yes : no);
    if (i >= 0 && spec.label_index(no) >= 0 && spec.label_index(yes) >= 0) return i;
  }
  return std::nullopt;
}

Dataset with_conditions(const Dataset &d, const std::vector<std::string> &names) {
  std::vector<int> cols;
  for (const auto &n : names) {
    int k = d.spec_index(n);
    if (k < 0) throw SchemaError("unknown condition '" + n + "'");
    cols.push_back(k);
  }
  Dataset out = d;
  out.specs.clear();
  for (int k : cols) out.specs.push_back(d.specs[k]);
  for (auto &r : out.records) {
    ConditionSet c;
    for (int k : cols) c.values.push_back(r.conditions.values[k]);
    r.conditions = std::move(c);
  }
  return out;
}

namespace {

std::vector<int> bfs_distances(const MolecularGraph &g, int src) {
  std::vector<int> dist(g.num_atoms(), -1);
  auto adj = g.adjacency();
  std::queue<int> q;
  dist[src] = 0;
  q.push(src);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (auto [v, k] : adj[u]) {
      (void)k;
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
    }
  }
  return dist;
}

MolecularGraph grow_once(const AtomVocab &vocab, const ToySpec &spec, Rng &rng) {
  std::vector<int> pool;
  std::vector<double> weights;
  for (const auto &s : spec.element_pool) {
    int idx = vocab.index_of(s);
    if (idx < 0 || idx == vocab.pad()) throw RangeError("element '" + s + "' not in vocabulary");
    pool.push_back(idx);
    weights.push_back(s == "C" ? 4.0 : 1.0);
  }
  const int n = spec.min_atoms +
                static_cast<int>(rng.uniform_int(spec.max_atoms - spec.min_atoms + 1));
  MolecularGraph g;
  g.add_atom(pool[rng.categorical(weights)]);
  while (g.num_atoms() < n) {
    int elem = pool[rng.categorical(weights)];
    std::vector<int> parents;
    for (int i = 0; i < g.num_atoms(); ++i) {
      if (spare_half_valence(g, vocab, i) >= 2) parents.push_back(i);
    }
    if (parents.empty()) break;
    int p = parents[rng.uniform_int(parents.size())];
    int child = g.add_atom(elem);
    BondKind kind = BondKind::kSingle;
    if (rng.bernoulli(0.15) && spare_half_valence(g, vocab, p) >= 4 &&
        2 * vocab.max_valence(elem) >= 4) {
      kind = BondKind::kDouble;
    }
    g.add_bond(p, child, kind);
  }
  const int rings = static_cast<int>(rng.uniform_int(spec.max_rings + 1));
  for (int r = 0; r < rings; ++r) {
    std::vector<std::pair<int, int>> preferred, fallback;
    for (int i = 0; i < g.num_atoms(); ++i) {
      if (spare_half_valence(g, vocab, i) < 2) continue;
      auto dist = bfs_distances(g, i);
      for (int j = i + 1; j < g.num_atoms(); ++j) {
        if (spare_half_valence(g, vocab, j) < 2 || dist[j] < 2) continue;
        (dist[j] == 4 || dist[j] == 5 ? preferred : fallback).emplace_back(i, j);
      }
    }
    auto &cands = preferred.empty() ? fallback : preferred;
    if (cands.empty()) break;
    auto [i, j] = cands[rng.uniform_int(cands.size())];
    g.add_bond(i, j, BondKind::kSingle);
  }
  return g;
}

}  // namespace

MolecularGraph grow_molecule(const AtomVocab &vocab, const ToySpec &spec, Rng &rng) {
  if (spec.min_atoms < 1 || spec.max_atoms < spec.min_atoms)
    throw RangeError("toy spec needs 1 <= min_atoms <= max_atoms");
  if (spec.element_pool.empty()) throw RangeError("toy spec has an empty element pool");
  for (int attempt = 0; attempt < 10000; ++attempt) {
    MolecularGraph g = grow_once(vocab, spec, rng);
    if (g.num_atoms() >= spec.min_atoms && is_valid(g, vocab)) return g;
  }
  throw RangeError("toy element pool cannot form valid molecules of the requested size");
}

Dataset gen_toy_dataset(const ToySpec &spec) {
  Dataset d;
  d.vocab = AtomVocab::from_symbols(spec.element_pool);
  d.n_max = spec.max_atoms;
  d.seed = spec.seed;
  ConditionSpec rc, hf, hr;
  rc.name = "ring_count";
  hf.name = "hetero_frac";
  hr.name = "has_ring";
  hr.kind = ConditionKind::kCategorical;
  hr.cardinality = 2;
  hr.labels = {"false", "true"};
  d.specs = {rc, hf, hr};
  for (int m = 0; m < spec.n_molecules; ++m) {
    Rng rng(derive_seed(spec.seed, 0x70E, m));
    MolecularGraph g = grow_molecule(d.vocab, spec, rng);
    Record rec;
    rec.smiles = write_smiles(g, d.vocab);
    rec.graph = parse_smiles(rec.smiles, d.vocab);
    rec.conditions = ConditionSet::null(d.specs.size());
    for (std::size_t k = 0; k < d.specs.size(); ++k)
      rec.conditions.values[k] = synthetic_property(d.specs[k].name, rec.graph, d.vocab);
    d.records.push_back(std::move(rec));
  }
  d.splits = split_indices(d.records.size(), spec.seed);
  fit_ranges(d);
  return d;
}

nlohmann::json dataset_to_json(const Dataset &d) {
  nlohmann::json j;
  j["format"] = "graphdiff-dataset";
  j["version"] = 1;
  j["vocab"] = d.vocab.symbols();
  j["n_max"] = d.n_max;
  j["seed"] = d.seed;
  j["conditions"] = d.specs;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto &r : d.records)
    recs.push_back({{"smiles", r.smiles}, {"values", conditions_to_json(r.conditions, d.specs)}});
  j["records"] = std::move(recs);
  j["splits"] = {{"train", d.splits.train}, {"valid", d.splits.valid}, {"test", d.splits.test}};
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto &s : d.skipped) skipped.push_back({{"row", s.row}, {"reason", s.reason}});
  j["skipped"] = std::move(skipped);
  return j;
}

Dataset dataset_from_json(const nlohmann::json &j) {
  if (j.value("format", "") != "graphdiff-dataset") throw SchemaError("not a dataset bundle");
  if (j.value("version", 0) != 1) throw SchemaError("unsupported dataset bundle version");
  Dataset d;
  auto symbols = j.at("vocab").get<std::vector<std::string>>();
  d.vocab = AtomVocab::from_symbols(symbols);
  if (d.vocab.symbols() != symbols) throw SchemaError("bundle vocabulary is not in canonical order");
  d.n_max = j.at("n_max").get<int>();
  d.seed = j.at("seed").get<std::uint64_t>();
  d.specs = j.at("conditions").get<std::vector<ConditionSpec>>();
  for (const auto &s : d.specs) s.validate();
  for (const auto &r : j.at("records")) {
    Record rec;
    rec.smiles = r.at("smiles").get<std::string>();
    rec.graph = parse_smiles(rec.smiles, d.vocab);
    rec.conditions = conditions_from_json(r.at("values"), d.specs);
    d.records.push_back(std::move(rec));
  }
  const auto &s = j.at("splits");
  d.splits.train = s.at("train").get<std::vector<int>>();
  d.splits.valid = s.at("valid").get<std::vector<int>>();
  d.splits.test = s.at("test").get<std::vector<int>>();
  std::vector<int> all = d.splits.train;
  all.insert(all.end(), d.splits.valid.begin(), d.splits.valid.end());
  all.insert(all.end(), d.splits.test.begin(), d.splits.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] != static_cast<int>(i)) throw SchemaError("splits do not partition the records");
  }
  if (all.size() != d.records.size()) throw SchemaError("splits do not partition the records");
  for (const auto &k : j.value("skipped", nlohmann::json::array()))
    d.skipped.push_back({k.at("row").get<int>(), k.at("reason").get<std::string>()});
  return d;
}

void save_dataset(const Dataset &d, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << dataset_to_json(d).dump(1) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset load_dataset_bundle(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("malformed dataset bundle: ") + e.what());
  }
  try {
    return dataset_from_json(j);
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("malformed dataset bundle: ") + e.what());
  }
}

std::string skip_report_jsonl(const std::vector<SkipReport> &skipped) {
  std::string out;
  for (const auto &s : skipped)
    out += nlohmann::json{{"row", s.row}, {"reason", s.reason}}.dump() + "\n";
  return out;
}

void to_json(nlohmann::json &j, const ToySpec &s) {
  j = nlohmann::json{{"n_molecules", s.n_molecules}, {"min_atoms", s.min_atoms},
                     {"max_atoms", s.max_atoms},     {"element_pool", s.element_pool},
                     {"max_rings", s.max_rings},     {"seed", s.seed}};
}

void from_json(const nlohmann::json &j, ToySpec &s) {
  static const std::set<std::string> kKeys = {"n_molecules", "min_atoms", "max_atoms",
                                              "element_pool", "max_rings", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kKeys.count(it.key())) throw SchemaError("unknown toy-spec key '" + it.key() + "'");
  }
  s = ToySpec{};
  s.n_molecules = j.value("n_molecules", s.n_molecules);
  s.min_atoms = j.value("min_atoms", s.min_atoms);
  s.max_atoms = j.value("max_atoms", s.max_atoms);
  s.element_pool = j.value("element_pool", s.element_pool);
  s.max_rings = j.value("max_rings", s.max_rings);
  s.seed = j.value("seed", s.seed);
  if (s.n_molecules < 0) throw SchemaError("n_molecules must be >= 0");
}

}  // namespace graphdiff
