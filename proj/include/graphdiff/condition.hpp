#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace graphdiff {

enum class ConditionKind { kNumeric, kCategorical };
enum class NumericEncoder { kCluster, kDirect, kInterval };

struct ConditionSpec {
  std::string name;
  ConditionKind kind = ConditionKind::kNumeric;
  // categorical
  int cardinality = 0;
  std::vector<std::string> labels;
  // numeric: min-max range of the training split
  double lo = 0.0;
  double hi = 1.0;
  NumericEncoder encoder = NumericEncoder::kCluster;
  int n_interval = 8;

  bool numeric() const { return kind == ConditionKind::kNumeric; }
  // Maps into [0, 1] by the min-max range; values outside are not clamped.
  double normalize(double x) const;
  // Label index or -1.
  int label_index(const std::string &label) const;
  // Throws SchemaError when the spec itself is inconsistent.
  void validate() const;
};

// One optional value per spec; nullopt is the null (dropped/unknown)
// condition. Categorical values hold the label index.
struct ConditionSet {
  std::vector<std::optional<double>> values;

  static ConditionSet null(std::size_t m) { return ConditionSet{std::vector<std::optional<double>>(m)}; }
  bool all_null() const;
  bool operator==(const ConditionSet &) const = default;
};

// Throws RangeError for non-finite numerics or out-of-range labels.
void validate_conditions(const ConditionSet &c, const std::vector<ConditionSpec> &specs);

std::string to_string(ConditionKind k);
std::string to_string(NumericEncoder e);
NumericEncoder encoder_from_string(const std::string &s);

void to_json(nlohmann::json &j, const ConditionSpec &s);
void from_json(const nlohmann::json &j, ConditionSpec &s);

// {"name": value-or-label-or-null, ...}
nlohmann::json conditions_to_json(const ConditionSet &c, const std::vector<ConditionSpec> &specs);
// Missing names are null. Unknown names throw SchemaError.
ConditionSet conditions_from_json(const nlohmann::json &j, const std::vector<ConditionSpec> &specs);

}  // namespace graphdiff
