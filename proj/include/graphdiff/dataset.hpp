#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphdiff/condition.hpp"
#include "graphdiff/molgraph.hpp"

namespace graphdiff {

struct Record {
  MolecularGraph graph;
  ConditionSet conditions;
  std::string smiles;  // canonical
};

struct SkipReport {
  int row = 0;  // 1-based data row (header excluded)
  std::string reason;
};

struct Splits {
  std::vector<int> train;
  std::vector<int> valid;
  std::vector<int> test;
};

struct Dataset {
  AtomVocab vocab;
  int n_max = 0;
  std::vector<ConditionSpec> specs;
  std::vector<Record> records;
  Splits splits;
  std::vector<SkipReport> skipped;
  std::uint64_t seed = 0;

  std::vector<const Record *> subset(const std::vector<int> &idx) const;
  // Histogram over atom counts of the training split; index = atom count.
  std::vector<double> train_size_histogram() const;
  int spec_index(const std::string &name) const;
};

// Seeded shuffle then 6:2:2 (rounded) train/valid/test.
Splits split_indices(std::size_t n, std::uint64_t seed, double train = 0.6, double valid = 0.2);

struct LoadOptions {
  // When nonempty, only these condition columns are used (SchemaError when
  // a name is missing). Kinds are inferred when not given.
  std::vector<ConditionSpec> specs;
  int n_max = 0;  // 0: largest molecule in the file
};

// CSV with header smiles,<prop>,...; empty cells are null conditions. Rows
// that fail to parse are skipped and reported.
Dataset load_dataset(const std::filesystem::path &path, const LoadOptions &options,
                     std::uint64_t seed);
Dataset load_dataset_text(const std::string &csv, const LoadOptions &options, std::uint64_t seed);

struct ToySpec {
  int n_molecules = 500;
  int min_atoms = 3;
  int max_atoms = 12;
  std::vector<std::string> element_pool = {"C", "N", "O"};
  int max_rings = 2;
  std::uint64_t seed = 0;
};

// Valence-respecting random growth with exact synthetic properties
// ring_count (numeric), hetero_frac (numeric) and has_ring (categorical).
Dataset gen_toy_dataset(const ToySpec &spec);
MolecularGraph grow_molecule(const AtomVocab &vocab, const ToySpec &spec, Rng &rng);

// Value of a named synthetic property, or nullopt for unknown names.
std::optional<double> synthetic_property(const std::string &name, const MolecularGraph &g,
                                         const AtomVocab &vocab);
// Exact oracle for a condition column: the synthetic property of the same
// name, as a label index for categorical specs whose labels spell a boolean
// (false/true, 0/1). nullopt when there is none.
std::optional<double> exact_oracle(const ConditionSpec &spec, const MolecularGraph &g,
                                   const AtomVocab &vocab);

// Same records and splits restricted to the named condition columns, in the
// given order. Throws SchemaError for unknown names.
Dataset with_conditions(const Dataset &d, const std::vector<std::string> &names);

nlohmann::json dataset_to_json(const Dataset &d);
Dataset dataset_from_json(const nlohmann::json &j);
void save_dataset(const Dataset &d, const std::filesystem::path &path);
Dataset load_dataset_bundle(const std::filesystem::path &path);
// One JSON object per line: {"row": n, "reason": "..."}.
std::string skip_report_jsonl(const std::vector<SkipReport> &skipped);

void to_json(nlohmann::json &j, const ToySpec &s);
void from_json(const nlohmann::json &j, ToySpec &s);

}  // namespace graphdiff
