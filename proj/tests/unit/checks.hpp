#pragma once

#include <string>
#include <utility>
#include <vector>

#include "graphdiff/denoiser.hpp"
#include "graphdiff/diffusion.hpp"
#include "graphdiff/tensor.hpp"
#include "oracles.hpp"

namespace testing {

using namespace graphdiff;

// Scalar read-out with fixed pseudo-random weights so every output element
// reaches the loss with a distinct coefficient.
inline Var weighted_sum(Tape &tape, Var out) {
  Rng rng(out.value().size() * 7919 + 17);
  Tensor w(out.value().shape);
  for (double &v : w.data) v = 2.0 * rng.uniform() - 1.0;
  return sum(mul(out, tape.constant(w)));
}

// Max relative finite-difference error of every tape op.
inline std::vector<std::pair<std::string, double>> op_grad_errors(std::uint64_t seed = 1) {
  Rng rng(seed);
  auto rnd = [&](int r, int c) { return uniform_tensor({r, c}, 1.0, rng); };
  auto row = [&](int c) { return uniform_tensor({c}, 1.0, rng); };
  std::vector<std::pair<std::string, double>> out;
  auto check = [&](const std::string &name, const LossFn &f, const std::vector<Tensor> &xs) {
    out.emplace_back(name, grad_check(f, xs));
  };
  auto unary = [&](const std::string &name, std::function<Var(Var)> op, Tensor x) {
    check(name, [op](Tape &t, const std::vector<Var> &v) { return weighted_sum(t, op(v[0])); }, {x});
  };
  auto binary = [&](const std::string &name, std::function<Var(Var, Var)> op, Tensor a, Tensor b) {
    check(name, [op](Tape &t, const std::vector<Var> &v) { return weighted_sum(t, op(v[0], v[1])); }, {a, b});
  };

  binary("matmul", matmul, rnd(3, 4), rnd(4, 2));
  binary("add", add, rnd(3, 4), rnd(3, 4));
  binary("sub", sub, rnd(3, 4), rnd(3, 4));
  binary("mul", mul, rnd(3, 4), rnd(3, 4));
  binary("add_row", add_row, rnd(3, 4), row(4));
  binary("mul_row", mul_row, rnd(3, 4), rnd(1, 4));
  unary("scale", [](Var a) { return scale(a, -1.7); }, rnd(3, 4));
  unary("transpose", transpose, rnd(3, 4));
  binary("concat_cols", [](Var a, Var b) { return concat_cols({a, b, a}); }, rnd(3, 2), rnd(3, 4));
  binary("concat_rows", [](Var a, Var b) { return concat_rows({b, a}); }, rnd(2, 3), rnd(4, 3));
  unary("slice_cols", [](Var a) { return slice_cols(a, 1, 3); }, rnd(3, 4));
  unary("slice_rows", [](Var a) { return slice_rows(a, 1, 3); }, rnd(4, 3));
  unary("reshape", [](Var a) { return reshape(a, {2, 6}); }, rnd(3, 4));
  unary("silu", silu, rnd(3, 4));
  unary("softmax_rows", [](Var a) { return softmax_rows(a); }, rnd(3, 4));
  unary("softmax_rows_masked", [](Var a) { return softmax_rows(a, {true, false, true, true}); }, rnd(3, 4));
  unary("normalize_rows", normalize_rows, rnd(3, 5));
  binary("attend", attend, rnd(3, 4), rnd(4, 2));
  unary("gather_rows", [](Var a) { return gather_rows(a, {2, 0, 2, 1}); }, rnd(3, 4));
  unary("gather_grid", [](Var a) { return gather_grid(a, {0, 1, 2, 1, 0, 1, 2, 1, 0}, 3, 2); }, rnd(3, 4));
  unary("pair_products", pair_products, rnd(3, 2));
  unary("sum", sum, rnd(3, 4));
  check("cross_entropy",
        [](Tape &, const std::vector<Var> &v) { return cross_entropy(v[0], {2, 0, 1}, {1.0, 0.0, 0.5}); },
        {rnd(3, 4)});
  check("adaln",
        [](Tape &t, const std::vector<Var> &v) { return weighted_sum(t, adaln(v[0], v[1], v[2])); },
        {rnd(3, 4), rnd(1, 4), rnd(1, 4)});
  check("adaln_gate",
        [](Tape &t, const std::vector<Var> &v) { return weighted_sum(t, adaln_gate(v[0], v[1], v[2], v[3])); },
        {rnd(3, 4), rnd(1, 4), rnd(1, 4), rnd(1, 4)});
  return out;
}

// Finite-difference check of the full training loss (denoiser + token loss)
// over every parameter of a small model, weights jittered away from init so
// no branch is gated off.
inline double training_loss_grad_error(CondMode mode, std::uint64_t seed = 1) {
  ToySpec ts;
  ts.n_molecules = 6;
  ts.max_atoms = 5;
  ts.seed = seed;
  Dataset d = gen_toy_dataset(ts);
  DenoiserConfig cfg;
  cfg.D = 8;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.K = 4;
  cfg.mode = mode;
  Model m = make_model(d, cfg, NoiseConfig{}, seed);
  Rng prng(derive_seed(seed, 77));
  for (const auto &name : m.params.names()) {
    for (double &v : m.params.get_mut(name).data) v += 0.3 * (2.0 * prng.uniform() - 1.0);
  }
  const auto &rec = d.records[0];
  GraphTokens x0 = to_tokens(rec.graph, d.vocab, d.n_max);
  Rng rng(derive_seed(seed, 78));
  GraphTokens xt = forward_jump_sample(x0, build_blocks(m.marginals, m.schedule.cumulative(60)), 1.0, rng);
  return grad_check_params(
      [&](Tape &tape, const ParamStore &p) { return token_loss(denoise(tape, p, m.cfg, xt, rec.conditions, 60), x0); },
      m.params, 1e-5, 0);
}

// Monte Carlo law of the two-atom reverse chain under fixed clean
// predictions versus exhaustive trajectory enumeration; returns the TV.
inline double reverse_chain_tv(int runs, std::uint64_t seed, int T = 3) {
  Marginals m;
  m.m_v = {0.6, 0.4, 0.0};  // two atom types and PAD
  m.m_e = {0.5, 0.3, 0.2, 0.0, 0.0};
  const std::vector<std::vector<double>> node_pred = {{0.7, 0.3, 0.0}, {0.2, 0.8, 0.0}};
  const std::vector<double> edge_pred = {0.1, 0.6, 0.3, 0.0, 0.0};
  auto sched = cosine_schedule(T);
  auto exact = enumerate_reverse_chain(m.m_v, m.m_e, node_pred, edge_pred, sched);
  CleanPrediction pred{node_pred, {edge_pred}};
  std::map<PairState, double> counts;
  Rng rng(seed);
  for (int r = 0; r < runs; ++r) {
    GraphTokens x = stationary_sample(m, 2, 2, rng);
    for (int t = T; t >= 1; --t) x = reverse_step(x, t, pred, sched, m, rng);
    counts[{x.node(0), x.node(1), x.edge(0, 1)}] += 1.0 / runs;
  }
  double tv = 0.0;
  for (const auto &[s, p] : exact) tv += std::abs(p - (counts.count(s) ? counts[s] : 0.0));
  for (const auto &[s, p] : counts) {
    if (!exact.count(s)) tv += p;
  }
  return 0.5 * tv;
}

// Worst |posterior - path enumeration| over every (x_t, x0, t) with up to
// three classes and T <= 3, for both token kinds.
inline double posterior_max_error() {
  Marginals m;
  m.m_v = {0.5, 0.3, 0.2};
  m.m_e = {0.6, 0.4, 0.0};
  double worst = 0.0;
  for (int T = 1; T <= 3; ++T) {
    auto sched = cosine_schedule(T);
    for (int t = 1; t <= T; ++t) {
      for (auto kind : {TokenKind::kNode, TokenKind::kEdge}) {
        const auto &mm = kind == TokenKind::kNode ? m.m_v : m.m_e;
        for (int x0 = 0; x0 < 3; ++x0) {
          for (int xt = 0; xt < 3; ++xt) {
            double z = 0.0, reach = 0.0;
            auto q = posterior(xt, x0, t, sched, m, kind, &z);
            auto brute = path_posterior(xt, x0, t, sched, mm, &reach);
            if ((z > 0) != (reach > 0)) return INFINITY;
            if (reach <= 0) continue;
            for (int s = 0; s < 3; ++s) worst = std::max(worst, std::abs(q[s] - brute[s]));
          }
        }
      }
    }
  }
  return worst;
}

}  // namespace testing
