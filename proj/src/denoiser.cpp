#include "graphdiff/denoiser.hpp"

#include <cmath>

#include "graphdiff/conditioning.hpp"
#include "graphdiff/error.hpp"

namespace graphdiff {

namespace {

constexpr double kNoneMargin = 1e4;

void add_affine(ParamStore &s, const std::string &name, int in, int out, Rng &rng) {
  s.add(name + "/w", uniform_tensor({in, out}, 1.0 / std::sqrt(in), rng));
  s.add(name + "/b", Tensor({out}, 0.0));
}

void add_modulation(ParamStore &s, const std::string &name, int D, int out, Rng &rng) {
  s.add(name + "/w1", Tensor({D, out}, 0.0));
  s.add(name + "/b1", Tensor({out}, 0.0));
  s.add(name + "/w2", uniform_tensor({out, out}, 1.0 / std::sqrt(out), rng));
  s.add(name + "/b2", Tensor({out}, 0.0));
}

void add_norm(ParamStore &s, const std::string &name, int width) {
  s.add(name + "/g", Tensor({width}, 1.0));
  s.add(name + "/b", Tensor({width}, 0.0));
}

Var affine(Tape &t, const ParamStore &p, const std::string &name, Var x) {
  return add_row(matmul(x, t.param(p, name + "/w")), t.param(p, name + "/b"));
}

std::string lname(int l) { return "layer" + std::to_string(l); }

// Self- or cross-attention. Keys/values come from `kv`; `bias_grid` adds the
// per-head edge-kind bias when non-null; `key_mask` hides PAD keys.
Var attention(Tape &t, const ParamStore &p, const std::string &name, const DenoiserConfig &cfg, Var q_in,
              Var kv, const GraphTokens *edges, const std::vector<bool> &key_mask) {
  const int H = cfg.n_heads, dh = cfg.D / H;
  Var q = affine(t, p, name + "/q", q_in);
  Var k = affine(t, p, name + "/k", kv);
  Var v = affine(t, p, name + "/v", kv);
  Var kt = transpose(k);
  std::vector<Var> heads;
  for (int h = 0; h < H; ++h) {
    Var qh = slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = slice_rows(kt, h * dh, (h + 1) * dh);
    Var vh = slice_cols(v, h * dh, (h + 1) * dh);
    Var scores = scale(matmul(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    if (edges) {
      scores = add(scores, gather_grid(t.param(p, name + "/edge_bias"), edges->edges(), cfg.n_max, h));
    }
    heads.push_back(attend(softmax_rows(scores, key_mask), vh));
  }
  return affine(t, p, name + "/o", heads.size() == 1 ? heads[0] : concat_cols(heads));
}

Var mlp(Tape &t, const ParamStore &p, const std::string &name, Var x) {
  return affine(t, p, name + "/fc2", silu(affine(t, p, name + "/fc1", x)));
}

Var layer_norm(Tape &t, const ParamStore &p, const std::string &name, Var x) {
  return add_row(mul_row(normalize_rows(x), t.param(p, name + "/g")), t.param(p, name + "/b"));
}

// Repeats the F_E-wide edge part of a (F_V + F_E) row n times.
Var tile_token_row(Var row, int f_v, int f_e, int n) {
  std::vector<Var> parts{slice_cols(row, 0, f_v)};
  Var edge = slice_cols(row, f_v, f_v + f_e);
  for (int j = 0; j < n; ++j) parts.push_back(edge);
  return concat_cols(parts);
}

Var as_row(Var v) { return v.value().rank() == 2 ? v : reshape(v, {1, v.cols()}); }

}  // namespace

std::string to_string(CondMode m) {
  switch (m) {
    case CondMode::kAdaLN: return "adaln";
    case CondMode::kInContext: return "in_context";
    case CondMode::kCrossAttention: return "cross_attention";
  }
  return "adaln";
}

CondMode cond_mode_from_string(const std::string &s) {
  if (s == "adaln") return CondMode::kAdaLN;
  if (s == "in_context") return CondMode::kInContext;
  if (s == "cross_attention") return CondMode::kCrossAttention;
  throw SchemaError("unknown conditioning mode '" + s + "'");
}

void DenoiserConfig::validate() const {
  if (D <= 0 || D % 2 != 0) throw RangeError("D must be a positive even number");
  if (n_heads <= 0 || D % n_heads != 0) throw RangeError("D must be divisible by the head count");
  if (n_layers < 0) throw RangeError("layer count must be >= 0");
  if (n_max < 1) throw RangeError("n_max must be >= 1");
  if (f_v < 2) throw RangeError("atom vocabulary needs at least one type besides PAD");
  if (K < 1) throw RangeError("cluster count must be >= 1");
  for (const auto &s : specs) s.validate();
}

void to_json(nlohmann::json &j, const DenoiserConfig &c) {
  j = nlohmann::json{{"D", c.D},         {"layers", c.n_layers}, {"heads", c.n_heads},
                     {"n_max", c.n_max}, {"f_v", c.f_v},         {"K", c.K},
                     {"conditioning_mode", to_string(c.mode)}, {"conditions", c.specs}};
}

void from_json(const nlohmann::json &j, DenoiserConfig &c) {
  c = DenoiserConfig{};
  c.D = j.at("D");
  c.n_layers = j.at("layers");
  c.n_heads = j.at("heads");
  c.n_max = j.at("n_max");
  c.f_v = j.at("f_v");
  c.K = j.at("K");
  c.mode = cond_mode_from_string(j.at("conditioning_mode"));
  c.specs = j.at("conditions").get<std::vector<ConditionSpec>>();
}

ParamStore init_params(const DenoiserConfig &cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, 0x1417));
  const int D = cfg.D, fv = cfg.f_v, fe = cfg.f_e();
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.f_g()));
  ParamStore s;
  init_condition_params(s, cfg.specs, D, cfg.K, rng);
  s.add("embed/node", uniform_tensor({fv, D}, bound, rng));
  s.add("embed/edge", uniform_tensor({fe, D}, bound, rng));
  s.add("embed/b", Tensor({D}, 0.0));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string L = lname(l);
    for (const char *m : {"q", "k", "v", "o"}) add_affine(s, L + "/attn/" + m, D, D, rng);
    s.add(L + "/attn/edge_bias", uniform_tensor({fe, cfg.n_heads}, 0.1, rng));
    add_affine(s, L + "/mlp/fc1", D, 2 * D, rng);
    add_affine(s, L + "/mlp/fc2", 2 * D, D, rng);
    if (cfg.mode == CondMode::kAdaLN) {
      for (const char *m : {"gamma1", "beta1", "alpha1", "gamma2", "beta2", "alpha2"})
        add_modulation(s, L + "/mod/" + m, D, D, rng);
    } else {
      add_norm(s, L + "/ln1", D);
      add_norm(s, L + "/ln2", D);
    }
    if (cfg.mode == CondMode::kCrossAttention) {
      for (const char *m : {"q", "k", "v", "o"}) add_affine(s, L + "/xattn/" + m, D, D, rng);
      add_norm(s, L + "/ln3", D);
    }
  }
  add_affine(s, "dec/fc", D, D, rng);
  add_affine(s, "dec/node", D, fv, rng);
  add_affine(s, "dec/edge", D, D, rng);
  add_affine(s, "dec/pair", D, fe, rng);
  s.add("dec/current_edge", uniform_tensor({fe, fe}, 1.0 / std::sqrt(fe), rng));
  if (cfg.mode == CondMode::kAdaLN) {
    add_modulation(s, "dec/mod/gamma", D, fv + fe, rng);
    add_modulation(s, "dec/mod/beta", D, fv + fe, rng);
  } else {
    add_norm(s, "dec/ln", fv + fe);
  }
  return s;
}

Var embed_tokens(Tape &t, const ParamStore &p, const DenoiserConfig &cfg, const GraphTokens &x) {
  if (x.n_max() != cfg.n_max || x.f_v() != cfg.f_v) throw ShapeError("tokens do not match the model");
  const int n = cfg.n_max, fe = cfg.f_e();
  Tensor counts = Tensor::matrix(n, fe);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) counts.at(i, x.edge(i, j)) += 1.0;
  }
  Var h = add(gather_rows(t.param(p, "embed/node"), x.nodes()),
              matmul(t.constant(std::move(counts)), t.param(p, "embed/edge")));
  return add_row(h, t.param(p, "embed/b"));
}

Var modulation(Tape &t, const ParamStore &p, const std::string &prefix, Var c) {
  Var hidden = silu(add_row(matmul(c, t.param(p, prefix + "/w1")), t.param(p, prefix + "/b1")));
  return add_row(matmul(hidden, t.param(p, prefix + "/w2")), t.param(p, prefix + "/b2"));
}

Var adaln(Var h, Var gamma, Var beta) {
  return add_row(mul_row(normalize_rows(h), gamma), beta);
}

Var adaln_gate(Var h, Var gamma, Var beta, Var alpha) {
  return mul_row(adaln(h, gamma, beta), alpha);
}

Var transformer_layer(Tape &t, const ParamStore &p, const DenoiserConfig &cfg, int l, Var h, Var c,
                      Var context, const GraphTokens &x) {
  const std::string L = lname(l);
  const std::vector<bool> mask = x.mask();
  auto attn = [&](Var in) { return attention(t, p, L + "/attn", cfg, in, in, &x, mask); };
  if (cfg.mode == CondMode::kAdaLN) {
    // Sublayer inputs are scaled by 1 + gamma(c): with a zero-initialized
    // head a bare gamma(c) scale zeroes the branch input, and together with
    // the zero gate that is a stationary point no gradient ever leaves.
    Var ones = t.constant(Tensor({1, cfg.D}, 1.0));
    auto mod = [&](const char *m) { return modulation(t, p, L + "/mod/" + m, c); };
    Var a_in = adaln(h, add(ones, mod("gamma1")), mod("beta1"));
    h = add(h, mul_row(attn(a_in), mod("alpha1")));
    Var m_in = adaln(h, add(ones, mod("gamma2")), mod("beta2"));
    h = add(h, mul_row(mlp(t, p, L + "/mlp", m_in), mod("alpha2")));
    return h;
  }
  h = add(h, attn(layer_norm(t, p, L + "/ln1", h)));
  if (cfg.mode == CondMode::kCrossAttention) {
    h = add(h, attention(t, p, L + "/xattn", cfg, layer_norm(t, p, L + "/ln3", h), context, nullptr, {}));
  }
  h = add(h, mlp(t, p, L + "/mlp", layer_norm(t, p, L + "/ln2", h)));
  return h;
}

DenoiserOutput decode(Tape &t, const ParamStore &p, const DenoiserConfig &cfg, Var h, Var c,
                      const GraphTokens &x) {
  const int n = cfg.n_max, fv = cfg.f_v, fe = cfg.f_e();
  Var z = silu(affine(t, p, "dec/fc", h));
  Var node = affine(t, p, "dec/node", z);
  Var u = affine(t, p, "dec/edge", z);
  Var pair = affine(t, p, "dec/pair", pair_products(u));
  pair = add(pair, gather_rows(t.param(p, "dec/current_edge"), x.edges()));
  Var row = concat_cols({node, reshape(pair, {n, n * fe})});
  if (cfg.mode == CondMode::kAdaLN) {
    Var gamma = tile_token_row(modulation(t, p, "dec/mod/gamma", c), fv, fe, n);
    Var beta = tile_token_row(modulation(t, p, "dec/mod/beta", c), fv, fe, n);
    row = adaln(row, gamma, beta);
  } else {
    Var g = tile_token_row(as_row(t.param(p, "dec/ln/g")), fv, fe, n);
    Var b = tile_token_row(as_row(t.param(p, "dec/ln/b")), fv, fe, n);
    row = add_row(mul_row(normalize_rows(row), g), b);
  }
  DenoiserOutput out;
  out.node_logits = slice_cols(row, 0, fv);
  Var edges = reshape(slice_cols(row, fv, fv + n * fe), {n * n, fe});
  std::vector<int> mirror(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) mirror[i * n + j] = j * n + i;
  }
  edges = scale(add(edges, gather_rows(edges, mirror)), 0.5);
  Tensor keep = Tensor::matrix(n * n, fe, 1.0), fixed = Tensor::matrix(n * n, fe, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int e = 0; e < fe; ++e) {
      keep.at(i * n + i, e) = 0.0;
      fixed.at(i * n + i, e) = e == 0 ? 0.0 : -kNoneMargin;
    }
  }
  out.edge_logits = add(mul(edges, t.constant(std::move(keep))), t.constant(std::move(fixed)));
  return out;
}

DenoiserOutput denoise(Tape &t, const ParamStore &p, const DenoiserConfig &cfg, const GraphTokens &x,
                       const ConditionSet &cset, int step) {
  ConditionParts parts = condition_parts(t, p, cfg.specs, cset, step, cfg.D);
  Var c = add(parts.timestep, parts.conditions);
  Var h = embed_tokens(t, p, cfg, x);
  if (cfg.mode == CondMode::kInContext) h = add_row(h, c);
  Var context = cfg.mode == CondMode::kCrossAttention ? concat_rows({parts.timestep, parts.conditions})
                                                      : Var{};
  for (int l = 0; l < cfg.n_layers; ++l) h = transformer_layer(t, p, cfg, l, h, c, context, x);
  return decode(t, p, cfg, h, c, x);
}

std::vector<double> dense_logits(const DenoiserOutput &out, const DenoiserConfig &cfg) {
  const int n = cfg.n_max, fv = cfg.f_v, fe = cfg.f_e();
  std::vector<double> d(static_cast<std::size_t>(n) * cfg.f_g());
  const Tensor &node = out.node_logits.value(), &edge = out.edge_logits.value();
  for (int i = 0; i < n; ++i) {
    double *row = &d[static_cast<std::size_t>(i) * cfg.f_g()];
    for (int v = 0; v < fv; ++v) row[v] = node.at(i, v);
    for (int j = 0; j < n; ++j) {
      for (int e = 0; e < fe; ++e) row[fv + j * fe + e] = edge.at(i * n + j, e);
    }
  }
  return d;
}

}  // namespace graphdiff
