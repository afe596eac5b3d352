#include "graphdiff/conditioning.hpp"

#include <cmath>

#include "graphdiff/error.hpp"

namespace graphdiff {

namespace {

std::string key(const ConditionSpec &s, const char *part) { return "cond/" + s.name + "/" + part; }

}  // namespace

void init_condition_params(ParamStore &store, const std::vector<ConditionSpec> &specs, int D, int K,
                           Rng &rng) {
  if (K < 1) throw RangeError("cluster count must be >= 1");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto &s = specs[i];
    s.validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (specs[j].name == s.name) throw SchemaError("duplicate condition name '" + s.name + "'");
    }
    if (!s.numeric()) {
      store.add(key(s, "table"), uniform_tensor({s.cardinality + 1, D}, 1.0, rng));
      continue;
    }
    switch (s.encoder) {
      case NumericEncoder::kCluster:
        store.add(key(s, "w1"), uniform_tensor({1, K}, 1.0, rng));
        store.add(key(s, "b1"), uniform_tensor({K}, 1.0, rng));
        store.add(key(s, "w2"), uniform_tensor({K, D}, 1.0 / std::sqrt(K), rng));
        store.add(key(s, "b2"), uniform_tensor({D}, 1.0 / std::sqrt(K), rng));
        store.add(key(s, "null"), uniform_tensor({D}, 1.0, rng));
        break;
      case NumericEncoder::kDirect:
        store.add(key(s, "w"), uniform_tensor({1, D}, 1.0, rng));
        store.add(key(s, "b"), uniform_tensor({D}, 1.0, rng));
        store.add(key(s, "null"), uniform_tensor({D}, 1.0, rng));
        break;
      case NumericEncoder::kInterval:
        store.add(key(s, "table"), uniform_tensor({s.n_interval + 1, D}, 1.0, rng));
        break;
    }
  }
}

std::vector<double> encode_timestep(int t, int D) {
  if (D <= 0 || D % 2 != 0) throw RangeError("timestep encoding needs an even width");
  const int h = D / 2;
  std::vector<double> e(D);
  for (int k = 0; k < h; ++k) {
    double f = std::pow(10000.0, -2.0 * k / D);
    e[k] = std::sin(t * f);
    e[h + k] = std::cos(t * f);
  }
  return e;
}

int interval_index(double x_normalized, int n_interval) {
  double b = std::floor(x_normalized * n_interval);
  if (!(b >= 0)) return 0;
  if (b > n_interval - 1) return n_interval - 1;
  return static_cast<int>(b);
}

Var encode_condition(Tape &tape, const ParamStore &store, const ConditionSpec &s,
                     std::optional<double> value) {
  if (!s.numeric()) {
    int row = s.cardinality;
    if (value) {
      if (*value < 0 || *value >= s.cardinality || *value != std::floor(*value))
        throw RangeError("label of '" + s.name + "' out of range");
      row = static_cast<int>(*value);
    }
    return gather_rows(tape.param(store, key(s, "table")), {row});
  }
  if (value && !std::isfinite(*value)) throw RangeError("condition '" + s.name + "' is not finite");
  switch (s.encoder) {
    case NumericEncoder::kCluster: {
      if (!value) return reshape(tape.param(store, key(s, "null")), {1, store.get(key(s, "null")).cols()});
      Var x = tape.constant(Tensor({1, 1}, s.normalize(*value)));
      Var logits = add_row(matmul(x, tape.param(store, key(s, "w1"))), tape.param(store, key(s, "b1")));
      Var p = softmax_rows(logits);
      return add_row(matmul(p, tape.param(store, key(s, "w2"))), tape.param(store, key(s, "b2")));
    }
    case NumericEncoder::kDirect: {
      if (!value) return reshape(tape.param(store, key(s, "null")), {1, store.get(key(s, "null")).cols()});
      Var x = tape.constant(Tensor({1, 1}, s.normalize(*value)));
      return add_row(matmul(x, tape.param(store, key(s, "w"))), tape.param(store, key(s, "b")));
    }
    case NumericEncoder::kInterval: {
      int row = value ? interval_index(s.normalize(*value), s.n_interval) : s.n_interval;
      return gather_rows(tape.param(store, key(s, "table")), {row});
    }
  }
  throw SchemaError("unknown encoder");
}

ConditionParts condition_parts(Tape &tape, const ParamStore &store,
                               const std::vector<ConditionSpec> &specs, const ConditionSet &c, int t,
                               int D) {
  if (c.values.size() != specs.size()) throw RangeError("condition count does not match specs");
  ConditionParts parts;
  parts.timestep = tape.constant(Tensor({1, D}, encode_timestep(t, D)));
  if (specs.empty()) {
    parts.conditions = tape.constant(Tensor({1, D}, 0.0));
    return parts;
  }
  Var acc = encode_condition(tape, store, specs[0], c.values[0]);
  for (std::size_t i = 1; i < specs.size(); ++i)
    acc = add(acc, encode_condition(tape, store, specs[i], c.values[i]));
  parts.conditions = acc;
  return parts;
}

Var combine(Tape &tape, const ParamStore &store, const std::vector<ConditionSpec> &specs,
            const ConditionSet &c, int t, int D) {
  ConditionParts p = condition_parts(tape, store, specs, c, t, D);
  return add(p.timestep, p.conditions);
}

ConditionSet drop_conditions(const ConditionSet &c, double ratio, Rng &rng, bool per_condition) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw RangeError("drop ratio must lie in [0, 1]");
  ConditionSet out = c;
  if (per_condition) {
    for (auto &v : out.values) {
      if (rng.bernoulli(ratio)) v.reset();
    }
    return out;
  }
  if (rng.bernoulli(ratio)) return ConditionSet::null(c.values.size());
  return out;
}

}  // namespace graphdiff
