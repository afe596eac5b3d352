#include "graphdiff/condition.hpp"

#include <algorithm>
#include <cmath>

#include "graphdiff/error.hpp"

namespace graphdiff {

double ConditionSpec::normalize(double x) const {
  if (hi <= lo) return 0.5;
  return (x - lo) / (hi - lo);
}

int ConditionSpec::label_index(const std::string &label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
}

void ConditionSpec::validate() const {
  if (name.empty()) throw SchemaError("condition without a name");
  if (kind == ConditionKind::kCategorical) {
    if (cardinality < 2) throw SchemaError("categorical condition '" + name + "' needs >= 2 labels");
    if (static_cast<int>(labels.size()) > cardinality)
      throw SchemaError("'" + name + "' has more labels than its cardinality");
  } else {
    if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo)
      throw SchemaError("numeric condition '" + name + "' has an invalid range");
    if (encoder == NumericEncoder::kInterval && n_interval < 2)
      throw SchemaError("interval encoder of '" + name + "' needs >= 2 intervals");
  }
}

bool ConditionSet::all_null() const {
  return std::none_of(values.begin(), values.end(), [](const auto &v) { return v.has_value(); });
}

void validate_conditions(const ConditionSet &c, const std::vector<ConditionSpec> &specs) {
  if (c.values.size() != specs.size()) throw RangeError("condition count does not match specs");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!c.values[i]) continue;
    double v = *c.values[i];
    if (!std::isfinite(v)) throw RangeError("condition '" + specs[i].name + "' is not finite");
    if (!specs[i].numeric()) {
      if (v < 0 || v >= specs[i].cardinality || v != std::floor(v))
        throw RangeError("label of '" + specs[i].name + "' out of range");
    }
  }
}

std::string to_string(ConditionKind k) {
  return k == ConditionKind::kNumeric ? "numeric" : "categorical";
}

std::string to_string(NumericEncoder e) {
  switch (e) {
    case NumericEncoder::kCluster: return "cluster";
    case NumericEncoder::kDirect: return "direct";
    case NumericEncoder::kInterval: return "interval";
  }
  return "cluster";
}

NumericEncoder encoder_from_string(const std::string &s) {
  if (s == "cluster") return NumericEncoder::kCluster;
  if (s == "direct") return NumericEncoder::kDirect;
  if (s == "interval") return NumericEncoder::kInterval;
  throw SchemaError("unknown numeric encoder '" + s + "'");
}

void to_json(nlohmann::json &j, const ConditionSpec &s) {
  j = nlohmann::json{{"name", s.name}, {"kind", to_string(s.kind)}};
  if (s.numeric()) {
    j["range"] = {s.lo, s.hi};
    j["encoder"] = to_string(s.encoder);
    j["n_interval"] = s.n_interval;
  } else {
    j["cardinality"] = s.cardinality;
    j["labels"] = s.labels;
  }
}

void from_json(const nlohmann::json &j, ConditionSpec &s) {
  static const std::vector<std::string> kKeys = {"name",        "kind",   "range",  "encoder",
                                                 "n_interval",  "labels", "cardinality"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kKeys.begin(), kKeys.end(), it.key()) == kKeys.end())
      throw SchemaError("unknown condition key '" + it.key() + "'");
  }
  s = ConditionSpec{};
  s.name = j.at("name").get<std::string>();
  std::string kind = j.value("kind", "numeric");
  if (kind == "numeric") {
    s.kind = ConditionKind::kNumeric;
  } else if (kind == "categorical") {
    s.kind = ConditionKind::kCategorical;
  } else {
    throw SchemaError("unknown condition kind '" + kind + "'");
  }
  if (j.contains("range")) {
    s.lo = j["range"].at(0).get<double>();
    s.hi = j["range"].at(1).get<double>();
  }
  if (j.contains("encoder")) s.encoder = encoder_from_string(j["encoder"].get<std::string>());
  s.n_interval = j.value("n_interval", 8);
  if (j.contains("labels")) s.labels = j["labels"].get<std::vector<std::string>>();
  s.cardinality = j.value("cardinality", static_cast<int>(s.labels.size()));
}

nlohmann::json conditions_to_json(const ConditionSet &c, const std::vector<ConditionSpec> &specs) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto &v = c.values.at(i);
    if (!v) {
      j[specs[i].name] = nullptr;
    } else if (specs[i].numeric()) {
      j[specs[i].name] = *v;
    } else {
      int idx = static_cast<int>(*v);
      if (idx >= 0 && idx < static_cast<int>(specs[i].labels.size())) {
        j[specs[i].name] = specs[i].labels[idx];
      } else {
        j[specs[i].name] = idx;
      }
    }
  }
  return j;
}

ConditionSet conditions_from_json(const nlohmann::json &j, const std::vector<ConditionSpec> &specs) {
  ConditionSet c = ConditionSet::null(specs.size());
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto spec = std::find_if(specs.begin(), specs.end(),
                             [&](const ConditionSpec &s) { return s.name == it.key(); });
    if (spec == specs.end()) throw SchemaError("unknown condition '" + it.key() + "'");
    std::size_t i = spec - specs.begin();
    const auto &v = it.value();
    if (v.is_null()) continue;
    if (spec->numeric()) {
      if (!v.is_number()) throw SchemaError("condition '" + it.key() + "' must be numeric");
      c.values[i] = v.get<double>();
    } else if (v.is_string()) {
      int idx = spec->label_index(v.get<std::string>());
      if (idx < 0) throw SchemaError("unknown label for '" + it.key() + "'");
      c.values[i] = idx;
    } else if (v.is_number_integer()) {
      c.values[i] = v.get<int>();
    } else if (v.is_boolean()) {
      int idx = spec->label_index(v.get<bool>() ? "true" : "false");
      if (idx < 0) throw SchemaError("unknown label for '" + it.key() + "'");
      c.values[i] = idx;
    } else {
      throw SchemaError("condition '" + it.key() + "' must be a label");
    }
  }
  validate_conditions(c, specs);
  return c;
}

}  // namespace graphdiff
