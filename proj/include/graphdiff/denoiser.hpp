#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "graphdiff/condition.hpp"
#include "graphdiff/tensor.hpp"
#include "graphdiff/tokens.hpp"

namespace graphdiff {

enum class CondMode { kAdaLN, kInContext, kCrossAttention };
std::string to_string(CondMode m);
CondMode cond_mode_from_string(const std::string &s);

struct DenoiserConfig {
  int D = 64;
  int n_layers = 3;
  int n_heads = 4;
  int n_max = 12;
  int f_v = 0;
  int K = 16;  // cluster count of numeric condition encoders
  CondMode mode = CondMode::kAdaLN;
  std::vector<ConditionSpec> specs;

  int f_e() const { return GraphTokens::f_e(); }
  int f_g() const { return f_v + n_max * f_e(); }
  // Throws RangeError for inconsistent sizes.
  void validate() const;
};

void to_json(nlohmann::json &j, const DenoiserConfig &c);
void from_json(const nlohmann::json &j, DenoiserConfig &c);

// Uniform(+-1/sqrt(fan_in)) weights, zero biases. In the first affine of
// every modulation head weights and biases are zero, and so are the second
// biases, which makes every gated residual branch vanish at init.
ParamStore init_params(const DenoiserConfig &cfg, std::uint64_t seed);

// Node embedding with weights tied across edge slots:
//   H_i = W_node[x_i] + sum_e count_i(e) W_edge[e] + b
// where count_i(e) is the number of edge slots of row i holding kind e. This
// is a linear map of the token row that does not depend on atom order.
Var embed_tokens(Tape &tape, const ParamStore &p, const DenoiserConfig &cfg, const GraphTokens &x);

// Modulation head: affine D->out, SiLU, affine out->out, as a 1 x out row.
Var modulation(Tape &tape, const ParamStore &p, const std::string &prefix, Var c);
// gamma(c) * (h - mu) / sigma + beta(c), rows of h normalized independently.
Var adaln(Var h, Var gamma, Var beta);
// alpha(c) * adaln(h, c).
Var adaln_gate(Var h, Var gamma, Var beta, Var alpha);

// One transformer block. `c` is the combined condition (1 x D); `context` is
// the 2 x D [timestep; condition-sum] sequence used in cross-attention mode.
Var transformer_layer(Tape &tape, const ParamStore &p, const DenoiserConfig &cfg, int layer, Var h,
                      Var c, Var context, const GraphTokens &x);

struct DenoiserOutput {
  Var node_logits;  // n_max x F_V
  Var edge_logits;  // (n_max * n_max) x F_E, row i*n_max + j = slot (i, j)
};

// Node logits from an MLP of H; edge logits from products of per-atom edge
// features plus a table on the current edge kind. Rows are AdaLN-modulated
// over the full token width (edge-slot scale and shift shared across slots),
// edge logits are symmetrized by averaging (i,j) and (j,i), and diagonal
// slots are fixed to "none".
DenoiserOutput decode(Tape &tape, const ParamStore &p, const DenoiserConfig &cfg, Var h, Var c,
                      const GraphTokens &x);

// Full f_theta(X^t, C) at timestep t.
DenoiserOutput denoise(Tape &tape, const ParamStore &p, const DenoiserConfig &cfg,
                       const GraphTokens &x, const ConditionSet &cset, int t);

// Row-major n_max x F_G logits assembled from the two output blocks.
std::vector<double> dense_logits(const DenoiserOutput &out, const DenoiserConfig &cfg);

}  // namespace graphdiff
