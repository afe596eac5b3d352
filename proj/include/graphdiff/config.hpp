#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphdiff/checkpoint.hpp"
#include "graphdiff/dataset.hpp"
#include "graphdiff/diffusion.hpp"

namespace graphdiff {

struct DatasetSource {
  std::string path;           // dataset bundle (.json) or CSV
  std::optional<ToySpec> toy;  // used when path is empty
  int n_max = 0;              // CSV only; 0 = largest molecule
};

// A condition column and optional encoder overrides for numeric columns.
struct ConditionChoice {
  std::string name;
  std::optional<NumericEncoder> encoder;
  std::optional<int> n_interval;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DatasetSource dataset;
  std::vector<ConditionChoice> conditions;  // empty = every column
  NoiseConfig noise;
  DenoiserConfig model;  // D, layers, heads, K, mode; sizes come from the data
  TrainConfig train;
  SampleConfig sample;
  int sample_count = 100;
  DType checkpoint_dtype = DType::kF64;
};

// Unknown keys anywhere throw SchemaError; missing keys keep defaults.
RunConfig run_config_from_json(const nlohmann::json &j);
nlohmann::json to_json(const RunConfig &c);
RunConfig load_run_config(const std::filesystem::path &path);

// Loads or generates the dataset, keeps the chosen columns and applies the
// encoder overrides. Relative paths resolve against `base`.
Dataset resolve_dataset(const RunConfig &c, const std::filesystem::path &base);

std::string read_text(const std::filesystem::path &path);
void write_text(const std::filesystem::path &path, const std::string &text);
nlohmann::json read_json(const std::filesystem::path &path);

inline constexpr const char *kToolVersion = GRAPHDIFF_VERSION;

}  // namespace graphdiff
