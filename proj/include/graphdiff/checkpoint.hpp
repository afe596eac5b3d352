#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "graphdiff/tensor.hpp"

namespace graphdiff {

enum class DType { kF64, kF32 };

struct Checkpoint {
  ParamStore params;      // values plus optimizer moments and step
  nlohmann::json meta;    // resolved config, version, training position
};

// Writes `manifest` (JSON: tensor name, shape, dtype, byte offset) and a
// sibling little-endian payload `<manifest stem>.bin`. Optimizer moments are
// stored as "adam.m/<name>" and "adam.v/<name>" entries. f32 payloads round
// every value, so only f64 checkpoints resume bit-identically.
void save_checkpoint(const std::filesystem::path &manifest, const ParamStore &params,
                     const nlohmann::json &meta, DType dtype = DType::kF64);
// Throws IoError for unreadable files and CompatibilityError for malformed
// or inconsistent manifests.
Checkpoint load_checkpoint(const std::filesystem::path &manifest);

}  // namespace graphdiff
