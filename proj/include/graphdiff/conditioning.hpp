#pragma once

#include <optional>
#include <vector>

#include "graphdiff/condition.hpp"
#include "graphdiff/rng.hpp"
#include "graphdiff/tensor.hpp"

namespace graphdiff {

// Parameters live in a ParamStore under "cond/<name>/...":
//   cluster:     w1 [1,K], b1 [K], w2 [K,D], b2 [D], null [D]
//   direct:      w [1,D], b [D], null [D]
//   interval:    table [n_interval + 1, D] (last row = null)
//   categorical: table [cardinality + 1, D] (last row = null)
void init_condition_params(ParamStore &store, const std::vector<ConditionSpec> &specs, int D, int K,
                           Rng &rng);

// Sinusoidal encoding: element k < D/2 is sin(t * f_k), element D/2 + k is
// cos(t * f_k), with f_k = 10000^(-2k/D). D must be even.
std::vector<double> encode_timestep(int t, int D);

// Interval bucket of a normalized value: floor(x * n) clamped to [0, n-1].
int interval_index(double x_normalized, int n_interval);

// 1 x D embedding of one condition value (nullopt = null embedding). Numeric
// values are min-max normalized by the spec first. Throws RangeError for an
// out-of-range label.
Var encode_condition(Tape &tape, const ParamStore &store, const ConditionSpec &spec,
                     std::optional<double> value);

struct ConditionParts {
  Var timestep;  // 1 x D constant
  Var conditions;  // 1 x D sum over conditions (zero row when M = 0)
};
ConditionParts condition_parts(Tape &tape, const ParamStore &store,
                               const std::vector<ConditionSpec> &specs, const ConditionSet &c, int t,
                               int D);
// c = encode_timestep(t) + sum_i encode(c_i).
Var combine(Tape &tape, const ParamStore &store, const std::vector<ConditionSpec> &specs,
            const ConditionSet &c, int t, int D);

// With probability `ratio` the whole set becomes null; with `per_condition`
// each value is dropped independently instead.
ConditionSet drop_conditions(const ConditionSet &c, double ratio, Rng &rng,
                             bool per_condition = false);

}  // namespace graphdiff
