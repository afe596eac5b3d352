#include "graphdiff/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "graphdiff/error.hpp"
#include "graphdiff/smiles.hpp"

namespace graphdiff {

namespace {

std::map<std::uint64_t, std::int64_t> pooled_fragments(const std::vector<MolecularGraph> &mols,
                                                       const AtomVocab &vocab) {
  std::map<std::uint64_t, std::int64_t> counts;
  for (const auto &g : mols) {
    for (auto id : circular_identifiers(g, vocab, 2)) ++counts[id];
  }
  return counts;
}

void fit_gaussian(const std::vector<Descriptors> &x, Eigen::VectorXd &mu, Eigen::MatrixXd &cov) {
  const int n = static_cast<int>(x.size()), d = static_cast<int>(Descriptors{}.size());
  Eigen::MatrixXd m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) m(i, k) = x[i][k];
  }
  mu = m.colwise().mean();
  Eigen::MatrixXd c = m.rowwise() - mu.transpose();
  cov = c.transpose() * c / (n - 1);
}

// Symmetric PSD square root via eigendecomposition, negative eigenvalues
// from rounding clipped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd &a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double condition_loss(const ConditionSpec &spec, std::optional<double> value, double target) {
  if (!value) return std::numeric_limits<double>::infinity();
  return spec.numeric() ? std::abs(*value - target) : (*value == target ? 0.0 : 1.0);
}

}  // namespace

double validity(const std::vector<MolecularGraph> &mols, const AtomVocab &vocab, Conversion mode,
                std::uint64_t seed) {
  if (mols.empty()) throw EmptyInput("no molecules to score");
  int ok = 0;
  for (std::size_t k = 0; k < mols.size(); ++k) {
    const MolecularGraph &g = mols[k];
    bool v = false;
    switch (mode) {
      case Conversion::kAsIs: v = !g.empty() && is_valid(g, vocab); break;
      case Conversion::kLcc: v = !g.empty() && is_valid(largest_component(g, vocab), vocab); break;
      case Conversion::kConnectAll: {
        Rng rng(derive_seed(seed, k));
        v = !g.empty() && is_valid(connect_components(g, vocab, rng), vocab);
        break;
      }
    }
    ok += v ? 1 : 0;
  }
  return static_cast<double>(ok) / mols.size();
}

Coverage coverage(const std::vector<MolecularGraph> &gen, const std::vector<MolecularGraph> &train,
                  const AtomVocab &vocab, bool count_wildcard) {
  auto types = [&](const std::vector<MolecularGraph> &mols) {
    std::set<int> s;
    for (const auto &g : mols) {
      for (int a : g.atoms()) {
        if (a == vocab.pad() || (a == vocab.wildcard() && !count_wildcard)) continue;
        s.insert(a);
      }
    }
    return s;
  };
  std::set<int> tr = types(train), ge = types(gen);
  Coverage c;
  c.total = static_cast<int>(tr.size());
  for (int a : tr) c.found += ge.count(a) ? 1 : 0;
  return c;
}

double internal_diversity(const std::vector<MolecularGraph> &gen, const AtomVocab &vocab) {
  if (gen.size() < 2) throw TooFew("diversity needs at least 2 molecules");
  std::vector<Fingerprint> fps;
  for (const auto &g : gen) fps.push_back(fingerprint(g, vocab));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < fps.size(); ++i) {
    for (std::size_t j = i + 1; j < fps.size(); ++j, ++pairs) sum += tanimoto(fps[i], fps[j]);
  }
  return 1.0 - sum / pairs;
}

double fragment_similarity(const std::vector<MolecularGraph> &gen, const std::vector<MolecularGraph> &ref,
                           const AtomVocab &vocab) {
  if (gen.empty() || ref.empty()) throw EmptyInput("fragment similarity needs two nonempty sets");
  auto a = pooled_fragments(gen, vocab), b = pooled_fragments(ref, vocab);
  // Integer arithmetic keeps identical sets at exactly 1.
  std::int64_t dot = 0, na = 0, nb = 0;
  for (auto [id, c] : a) {
    na += c * c;
    auto it = b.find(id);
    if (it != b.end()) dot += c * it->second;
  }
  for (auto [id, c] : b) nb += c * c;
  if (na == 0 || nb == 0) return 0.0;
  double cos = static_cast<double>(dot) / std::sqrt(static_cast<double>(na) * static_cast<double>(nb));
  return std::clamp(cos, 0.0, 1.0);
}

Descriptors descriptors(const MolecularGraph &g, const AtomVocab &vocab) {
  const int n = g.num_atoms(), m = g.num_bonds();
  int aromatic = 0, max_degree = 0, wildcards = 0;
  for (const auto &b : g.bonds()) aromatic += b.kind == BondKind::kAromatic ? 1 : 0;
  for (int i = 0; i < n; ++i) {
    max_degree = std::max(max_degree, g.degree(i));
    wildcards += g.atom(i) == vocab.wildcard() ? 1 : 0;
  }
  return {static_cast<double>(n),
          static_cast<double>(m),
          static_cast<double>(ring_count(g)),
          m > 0 ? static_cast<double>(aromatic) / m : 0.0,
          hetero_fraction(g, vocab),
          n > 0 ? 2.0 * m / n : 0.0,
          static_cast<double>(max_degree),
          static_cast<double>(wildcards)};
}

double frechet_gaussian(const Eigen::VectorXd &mu1, const Eigen::MatrixXd &s1, const Eigen::VectorXd &mu2,
                        const Eigen::MatrixXd &s2) {
  if (mu1.size() != mu2.size() || s1.rows() != mu1.size() || s2.rows() != mu2.size())
    throw ShapeError("Gaussian parameters differ in dimension");
  // tr((S1 S2)^(1/2)) = tr((R S2 R)^(1/2)) with R = S1^(1/2); the latter is
  // symmetric PSD.
  Eigen::MatrixXd r = psd_sqrt(s1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r * s2 * r);
  double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  double d = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
  return std::max(d, 0.0);
}

double descriptor_frechet(const std::vector<MolecularGraph> &gen, const std::vector<MolecularGraph> &ref,
                          const AtomVocab &vocab) {
  if (gen.size() < 2 || ref.size() < 2) throw TooFew("descriptor Frechet needs at least 2 molecules per set");
  std::vector<Descriptors> a, b;
  for (const auto &g : gen) a.push_back(descriptors(g, vocab));
  for (const auto &g : ref) b.push_back(descriptors(g, vocab));
  auto sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa == sb) return 0.0;
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd c1, c2;
  fit_gaussian(a, mu1, c1);
  fit_gaussian(b, mu2, c2);
  return frechet_gaussian(mu1, c1, mu2, c2);
}

Oracle exact_oracle_for(const std::vector<ConditionSpec> &specs, const AtomVocab &vocab) {
  return [specs, vocab](int i, const MolecularGraph &g) { return exact_oracle(specs.at(i), g, vocab); };
}

std::vector<ConditionScore> condition_error(const std::vector<MolecularGraph> &gen,
                                            const std::vector<ConditionSet> &targets,
                                            const std::vector<ConditionSpec> &specs, const Oracle &oracle) {
  if (gen.size() != targets.size()) throw LengthMismatch("molecule and target counts differ");
  std::vector<ConditionScore> out;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    ConditionScore s;
    s.name = specs[c].name;
    s.numeric = specs[c].numeric();
    double acc = 0.0;
    for (std::size_t k = 0; k < gen.size(); ++k) {
      if (targets[k].values.size() != specs.size()) throw LengthMismatch("condition set has the wrong length");
      auto target = targets[k].values[c];
      if (!target) continue;
      auto v = oracle(static_cast<int>(c), gen[k]);
      if (!v) continue;
      acc += s.numeric ? std::abs(*v - *target) : (*v == *target ? 1.0 : 0.0);
      ++s.count;
    }
    s.value = s.count > 0 ? acc / s.count : 0.0;
    out.push_back(s);
  }
  return out;
}

KnnOracle knn_fit(const std::vector<MolecularGraph> &mols, const std::vector<double> &values, int k,
                  bool classification, const AtomVocab &vocab) {
  if (mols.empty()) throw EmptyFit("k-NN oracle needs at least one molecule");
  if (mols.size() != values.size()) throw LengthMismatch("molecule and value counts differ");
  if (k < 1 || k > static_cast<int>(mols.size())) throw RangeError("k must lie in [1, fit size]");
  KnnOracle o;
  for (const auto &g : mols) o.fps.push_back(fingerprint(g, vocab));
  o.values = values;
  o.k = k;
  o.classification = classification;
  o.vocab = vocab;
  return o;
}

double knn_predict(const KnnOracle &o, const MolecularGraph &g) {
  Fingerprint q = fingerprint(g, o.vocab);
  std::vector<std::pair<double, int>> sims;
  for (std::size_t i = 0; i < o.fps.size(); ++i) sims.emplace_back(tanimoto(q, o.fps[i]), static_cast<int>(i));
  std::stable_sort(sims.begin(), sims.end(), [](const auto &a, const auto &b) { return a.first > b.first; });
  sims.resize(o.k);
  if (o.classification) {
    std::map<double, int> votes;
    for (auto [s, i] : sims) ++votes[o.values[i]];
    int best_votes = 0;
    for (auto [label, v] : votes) best_votes = std::max(best_votes, v);
    for (auto [s, i] : sims) {
      if (votes[o.values[i]] == best_votes) return o.values[i];
    }
  }
  double wsum = 0.0, acc = 0.0, plain = 0.0;
  for (auto [s, i] : sims) {
    wsum += s;
    acc += s * o.values[i];
    plain += o.values[i];
  }
  return wsum > 0.0 ? acc / wsum : plain / o.k;
}

nlohmann::json to_json(const MetricsReport &r) {
  auto opt = [](const std::optional<double> &v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["n_samples"] = r.n_samples;
  j["validity"] = r.validity;
  j["validity_no_rule"] = r.validity_no_rule;
  j["validity_lcc"] = r.validity_lcc;
  j["coverage"] = {{"found", r.coverage.found}, {"total", r.coverage.total}};
  j["diversity"] = opt(r.diversity);
  j["fragment_similarity"] = opt(r.fragment_similarity);
  j["descriptor_frechet"] = opt(r.descriptor_frechet);
  nlohmann::json cs = nlohmann::json::object();
  for (const auto &c : r.conditions) {
    cs[c.name] = {{"metric", c.numeric ? "mae" : "accuracy"}, {"value", c.value}, {"count", c.count}};
  }
  j["conditions"] = cs;
  j["oracle"] = r.oracle;
  return j;
}

MetricsReport evaluate(const std::vector<MolecularGraph> &gen, const std::vector<MolecularGraph> &ref,
                       const std::vector<MolecularGraph> &train, const std::vector<ConditionSet> &targets,
                       const std::vector<ConditionSpec> &specs, const Oracle &oracle, const AtomVocab &vocab,
                       const std::string &oracle_name) {
  if (gen.empty()) throw EmptyInput("no generated molecules");
  MetricsReport r;
  r.n_samples = static_cast<int>(gen.size());
  r.validity = validity(gen, vocab, Conversion::kAsIs);
  r.validity_no_rule = validity(gen, vocab, Conversion::kConnectAll);
  r.validity_lcc = validity(gen, vocab, Conversion::kLcc);
  r.coverage = coverage(gen, train, vocab);
  if (gen.size() >= 2) r.diversity = internal_diversity(gen, vocab);
  if (!ref.empty()) r.fragment_similarity = fragment_similarity(gen, ref, vocab);
  if (gen.size() >= 2 && ref.size() >= 2) r.descriptor_frechet = descriptor_frechet(gen, ref, vocab);
  if (!targets.empty()) r.conditions = condition_error(gen, targets, specs, oracle);
  r.oracle = oracle_name;
  return r;
}

double median(std::vector<double> v) {
  if (v.empty()) throw EmptyInput("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

nlohmann::json to_json(const RankResult &r) {
  nlohmann::json j;
  j["n_per_condition"] = r.n_per_condition;
  j["n_cases"] = r.shared_k.size();
  j["shared_k"] = r.shared_k;
  j["median_k"] = r.median_k;
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t c = 0; c < r.names.size(); ++c) {
    // bins 1..n_per_condition + 1 (the last bin: worse than every list entry)
    std::vector<int> hist(r.n_per_condition + 1, 0);
    for (int rank : r.ranks[c]) ++hist[rank - 1];
    per[r.names[c]] = {{"ranks", r.ranks[c]}, {"median_rank", r.median_rank[c]}, {"histogram", hist}};
  }
  j["conditions"] = per;
  return j;
}

RankResult rank_experiment(const std::vector<const Model *> &singles, const Model &multi,
                           const std::vector<ConditionSet> &cases, const Oracle &oracle,
                           const RankConfig &cfg) {
  const auto &specs = multi.specs();
  if (singles.size() != specs.size()) throw LengthMismatch("need one single-condition model per condition");
  if (cases.empty()) throw EmptyInput("no test cases");
  for (std::size_t i = 0; i < singles.size(); ++i) {
    if (singles[i]->specs().size() != 1 || singles[i]->specs()[0].name != specs[i].name)
      throw CompatibilityError("single-condition model " + std::to_string(i) + " does not match '" +
                               specs[i].name + "'");
  }
  const int m = static_cast<int>(specs.size()), n = cfg.n_per_condition;
  RankResult r;
  r.n_per_condition = n;
  for (const auto &s : specs) r.names.push_back(s.name);
  r.ranks.assign(m, {});
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const ConditionSet &cs = cases[c];
    SampleConfig sc;
    sc.s_guide = cfg.s_guide;
    sc.threads = cfg.threads;
    sc.seed = derive_seed(cfg.seed, c, 0xFFFF);
    MolecularGraph g = sample_many(multi, {cs}, sc)[0].graph;
    std::vector<std::vector<std::string>> lists(m);
    for (int i = 0; i < m; ++i) {
      auto target = cs.values[i];
      if (!target) throw RangeError("rank cases need every condition set");
      sc.seed = derive_seed(cfg.seed, c, static_cast<std::uint64_t>(i));
      auto mols = sample_many(*singles[i], std::vector<ConditionSet>(n, ConditionSet{{target}}), sc);
      std::vector<std::pair<double, int>> errs;
      for (int k = 0; k < n; ++k) errs.emplace_back(condition_loss(specs[i], oracle(i, mols[k].graph), *target), k);
      std::stable_sort(errs.begin(), errs.end(), [](const auto &a, const auto &b) { return a.first < b.first; });
      for (auto [e, k] : errs) lists[i].push_back(write_smiles(mols[k].graph, multi.vocab));
      double own = condition_loss(specs[i], oracle(i, g), *target);
      int better = 0;
      for (auto [e, k] : errs) better += e < own ? 1 : 0;
      r.ranks[i].push_back(1 + better);
    }
    int k_case = n;
    for (int depth = 1; depth <= n && k_case == n; ++depth) {
      std::set<std::string> common(lists[0].begin(), lists[0].begin() + depth);
      for (int i = 1; i < m; ++i) {
        std::set<std::string> next;
        for (int d = 0; d < depth; ++d) {
          if (common.count(lists[i][d])) next.insert(lists[i][d]);
        }
        common = std::move(next);
      }
      if (!common.empty()) k_case = depth;
    }
    r.shared_k.push_back(k_case);
  }
  for (int i = 0; i < m; ++i) r.median_rank.push_back(median(std::vector<double>(r.ranks[i].begin(), r.ranks[i].end())));
  r.median_k = median(std::vector<double>(r.shared_k.begin(), r.shared_k.end()));
  return r;
}

}  // namespace graphdiff
