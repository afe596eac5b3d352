#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphdiff/config.hpp"
#include "graphdiff/evalsuite.hpp"

namespace graphdiff {

// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitNumeric = 3, kExitCompat = 4 };

// Entry point of the `graphdiff` tool. argv[0] is the program name.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

// Training run as done by `graphdiff train`: writes run.json, dataset.json,
// log.jsonl, checkpoint-last.json and checkpoint-best.json into `out`.
// With `resume` it continues from checkpoint-last.json, which must have been
// written with the same resolved config (CompatibilityError otherwise).
struct TrainRunResult {
  Model model;  // final weights
  std::vector<EpochLog> log;
};
TrainRunResult train_run(const RunConfig &cfg, const std::filesystem::path &config_dir,
                         const std::filesystem::path &out, bool resume, int threads);

Model load_model(const std::filesystem::path &checkpoint);

struct AblationRow {
  std::string variant;
  std::string encoder;
  std::string mode;
  std::string coupling;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double validity = 0.0;  // connect-all, no rejection
  std::vector<ConditionScore> scores;
  bool finite = true;
  double seconds = 0.0;
};
// Every numeric encoder under AdaLN, the two other conditioning modes and the
// literal coupling, each trained for `epochs` from the same seed and scored
// on `n_samples` molecules conditioned on test-split values.
std::vector<AblationRow> run_ablation(const RunConfig &base, const Dataset &d, int epochs, int n_samples,
                                      int threads);
nlohmann::json to_json(const AblationRow &r);
std::string ablation_table(const std::vector<AblationRow> &rows);

}  // namespace graphdiff
