#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "graphdiff/diffusion.hpp"
#include "graphdiff/fingerprint.hpp"

namespace graphdiff {

// Fraction of molecules whose valences check out after `mode` is applied.
// connect_all draws from derive_seed(seed, k) for molecule k. Throws
// EmptyInput for an empty set.
double validity(const std::vector<MolecularGraph> &mols, const AtomVocab &vocab, Conversion mode,
                std::uint64_t seed = 0);

struct Coverage {
  int found = 0;
  int total = 0;
};
// Distinct heavy-atom types of `train` that also appear in `gen`. The
// wildcard only counts when `count_wildcard` is set.
Coverage coverage(const std::vector<MolecularGraph> &gen, const std::vector<MolecularGraph> &train,
                  const AtomVocab &vocab, bool count_wildcard = false);

// 1 - mean pairwise Tanimoto over unordered pairs. Throws TooFew below 2.
double internal_diversity(const std::vector<MolecularGraph> &gen, const AtomVocab &vocab);

// Cosine between pooled circular-fragment count vectors (radius 0..2).
// Throws EmptyInput when either set is empty.
double fragment_similarity(const std::vector<MolecularGraph> &gen, const std::vector<MolecularGraph> &ref,
                           const AtomVocab &vocab);

// atom count, bond count, ring count, aromatic-bond fraction, hetero
// fraction, mean degree, max degree, wildcard count
using Descriptors = std::array<double, 8>;
Descriptors descriptors(const MolecularGraph &g, const AtomVocab &vocab);

// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2)), clamped at 0.
double frechet_gaussian(const Eigen::VectorXd &mu1, const Eigen::MatrixXd &s1, const Eigen::VectorXd &mu2,
                        const Eigen::MatrixXd &s2);
// Gaussians (mean, unbiased covariance) fitted to descriptor vectors. Equal
// descriptor multisets give exactly 0. Throws TooFew below 2 per set.
double descriptor_frechet(const std::vector<MolecularGraph> &gen, const std::vector<MolecularGraph> &ref,
                          const AtomVocab &vocab);

// Property evaluator: (condition index, molecule) -> value, or nullopt
// when it cannot score the molecule. Categorical values are label indices.
using Oracle = std::function<std::optional<double>(int, const MolecularGraph &)>;
Oracle exact_oracle_for(const std::vector<ConditionSpec> &specs, const AtomVocab &vocab);

struct ConditionScore {
  std::string name;
  bool numeric = true;
  double value = 0.0;  // MAE (numeric) or accuracy (categorical)
  int count = 0;       // scored pairs (null targets and unscored molecules skipped)
};
// Throws LengthMismatch when |gen| != |targets|.
std::vector<ConditionScore> condition_error(const std::vector<MolecularGraph> &gen,
                                            const std::vector<ConditionSet> &targets,
                                            const std::vector<ConditionSpec> &specs, const Oracle &oracle);

struct KnnOracle {
  std::vector<Fingerprint> fps;
  std::vector<double> values;
  int k = 5;
  bool classification = false;
  AtomVocab vocab;
};
// Throws EmptyFit for an empty fit set and RangeError unless 1 <= k <= n.
KnnOracle knn_fit(const std::vector<MolecularGraph> &mols, const std::vector<double> &values, int k,
                  bool classification, const AtomVocab &vocab);
// Neighbors ordered by Tanimoto similarity, ties by smaller fit index.
// Regression: similarity-weighted mean (plain mean if all similarities are
// 0). Classification: most votes, ties to the label of the nearer neighbor.
double knn_predict(const KnnOracle &o, const MolecularGraph &g);

struct MetricsReport {
  int n_samples = 0;
  double validity = 0.0;          // as generated
  double validity_no_rule = 0.0;  // after connect-all conversion, no rejection
  double validity_lcc = 0.0;
  Coverage coverage;
  std::optional<double> diversity;
  std::optional<double> fragment_similarity;
  std::optional<double> descriptor_frechet;
  std::vector<ConditionScore> conditions;
  std::string oracle;
};
nlohmann::json to_json(const MetricsReport &r);

// Full report. `train` feeds coverage; `targets` may be empty (no condition
// scores). Throws EmptyInput when gen is empty.
MetricsReport evaluate(const std::vector<MolecularGraph> &gen, const std::vector<MolecularGraph> &ref,
                       const std::vector<MolecularGraph> &train, const std::vector<ConditionSet> &targets,
                       const std::vector<ConditionSpec> &specs, const Oracle &oracle, const AtomVocab &vocab,
                       const std::string &oracle_name);

struct RankConfig {
  int n_per_condition = 30;
  double s_guide = 2.0;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct RankResult {
  std::vector<std::string> names;
  std::vector<std::vector<int>> ranks;  // [condition][case], 1 = best
  std::vector<double> median_rank;
  std::vector<int> shared_k;            // per case
  double median_k = 0.0;
  int n_per_condition = 30;
};
nlohmann::json to_json(const RankResult &r);

// For each case, single model i (conditioned on condition i alone) yields
// n_per_condition molecules sorted by oracle error; the multi-conditional
// model yields one. Its rank in list i is 1 + the number of list entries with
// strictly smaller error. K per case is the smallest depth at which every
// list's prefix holds a common molecule (canonical SMILES), or
// n_per_condition when there is none.
RankResult rank_experiment(const std::vector<const Model *> &singles, const Model &multi,
                           const std::vector<ConditionSet> &cases, const Oracle &oracle,
                           const RankConfig &cfg);

// Mean of the two middle values for even sizes. Throws EmptyInput.
double median(std::vector<double> v);

}  // namespace graphdiff
