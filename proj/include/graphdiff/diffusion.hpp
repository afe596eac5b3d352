#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphdiff/dataset.hpp"
#include "graphdiff/denoiser.hpp"
#include "graphdiff/noise.hpp"
#include "graphdiff/tensor.hpp"

namespace graphdiff {

struct NoiseConfig {
  int T = 200;
  double s_offset = 0.008;
  CouplingMode coupling = CouplingMode::kSelfPreserving;
  double lambda = 1.0;
};

struct TrainConfig {
  int batch_size = 32;
  double lr = 3e-4;
  int epochs = 1;
  double drop_ratio = 0.1;
  bool per_condition_drop = false;
  double weight_decay = 0.01;
  OptKind optimizer = OptKind::kAdamW;
  int val_samples = 64;  // molecules sampled per epoch for validation metrics
  double val_s_guide = 2.0;
  int threads = 1;
};

enum class Conversion { kConnectAll, kLcc, kAsIs };
std::string to_string(Conversion c);
Conversion conversion_from_string(const std::string &s);

struct SampleConfig {
  double s_guide = 2.0;
  int n_atoms = 0;  // 0 = draw from the training size histogram
  Conversion conversion = Conversion::kConnectAll;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Everything needed to sample: weights plus the frozen noise model.
struct Model {
  DenoiserConfig cfg;
  ParamStore params;
  NoiseConfig noise;
  NoiseSchedule schedule;
  Marginals marginals;
  std::vector<double> size_histogram;  // index = atom count
  AtomVocab vocab;

  const std::vector<ConditionSpec> &specs() const { return cfg.specs; }
};

// Builds a fresh model for a dataset: marginals and size histogram from the
// training split, vocab and n_max from the dataset.
Model make_model(const Dataset &d, DenoiserConfig cfg, const NoiseConfig &noise, std::uint64_t seed);

// Static description (config, noise, marginals, vocab); params travel
// separately in the checkpoint payload.
nlohmann::json model_meta(const Model &m);
Model model_from_meta(const nlohmann::json &meta, ParamStore params);

struct TrainItem {
  const GraphTokens *x0;
  const ConditionSet *conditions;
};

// Per-molecule loss: mean cross-entropy over real node rows plus mean
// cross-entropy over real unordered pairs. Exposed for gradient checks.
Var token_loss(const DenoiserOutput &out, const GraphTokens &x0);

// Corrupts each item at its own t ~ U{1..T}, drops conditions and returns the
// batch-mean loss; gradients are applied with `opt`. Randomness derives from
// (seed, params.step, item) only, so a resumed run repeats the same step.
double train_step(Model &m, const std::vector<TrainItem> &batch, const TrainConfig &cfg,
                  std::uint64_t seed);
// Loss without updating (validation). Uses (seed, item) streams.
double eval_loss(const Model &m, const std::vector<TrainItem> &items, std::uint64_t seed, int threads = 1);

// log p_hat = (1 - s) log p_u + s log p_c, renormalized with log-sum-exp.
std::vector<double> guidance_combine(const std::vector<double> &logp_uncond,
                                     const std::vector<double> &logp_cond, double s_guide);

// Predicted clean-token distributions for every real node and real pair, after
// guidance (PAD excluded from node laws).
struct CleanPrediction {
  std::vector<std::vector<double>> nodes;  // per real atom, length F_V (PAD = 0)
  std::vector<std::vector<double>> edges;  // per real pair i<j in row-major order
};
CleanPrediction predict_clean(const Model &m, const GraphTokens &xt, const ConditionSet &c, int t,
                              double s_guide);

// Reverse-step law given a clean prediction: sum over feasible x0 of
// p_hat(x0) * posterior(z | x_t, x0), renormalized.
std::vector<double> reverse_law(int x_t, const std::vector<double> &p_hat, int t,
                                const NoiseSchedule &sched, const Marginals &m, TokenKind kind);

// x^t -> x^{t-1} from an explicit clean prediction: every real node and real
// pair i<j is drawn once from reverse_law; PAD rows stay PAD.
GraphTokens reverse_step(const GraphTokens &xt, int t, const CleanPrediction &pred,
                         const NoiseSchedule &sched, const Marginals &m, Rng &rng);

// One reverse step x^t -> x^{t-1} of the model.
GraphTokens denoise_step(const Model &m, const GraphTokens &xt, int t, const ConditionSet &c,
                         double s_guide, Rng &rng);

struct SampleResult {
  GraphTokens raw;       // x^0 tokens
  MolecularGraph graph;  // after conversion
};

SampleResult sample_one(const Model &m, const ConditionSet &c, const SampleConfig &cfg, Rng &rng);
// Molecule k uses the stream derive_seed(cfg.seed, k).
std::vector<SampleResult> sample_many(const Model &m, const std::vector<ConditionSet> &conds,
                                      const SampleConfig &cfg);

int draw_atom_count(const std::vector<double> &size_histogram, Rng &rng);

struct EpochLog {
  int epoch = 0;
  std::int64_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_validity = 0.0;
  std::vector<std::pair<std::string, double>> val_condition_error;
  double seconds = 0.0;
};
nlohmann::json to_json(const EpochLog &e);

struct TrainResult {
  std::vector<EpochLog> log;
  ParamStore best;  // lowest validation loss
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

// Runs epochs start_epoch+1 .. cfg.epochs on `m`. `on_epoch` runs after each
// epoch (checkpointing, logging); returning false stops early.
TrainResult train(Model &m, const Dataset &d, const TrainConfig &cfg, std::uint64_t seed,
                  int start_epoch = 0,
                  const std::function<bool(const EpochLog &, const Model &)> &on_epoch = {});

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to per-index slots so the output does not depend on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)> &fn);

}  // namespace graphdiff
