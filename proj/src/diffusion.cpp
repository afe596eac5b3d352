#include "graphdiff/diffusion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "graphdiff/conditioning.hpp"
#include "graphdiff/error.hpp"

namespace graphdiff {

namespace {

constexpr std::uint64_t kValStream = 0x7A11D;
constexpr std::uint64_t kShuffleStream = 0x5EED;
constexpr std::uint64_t kValSampleStream = 0x5A3B;

// Restricts logits to `allowed` classes and returns their log-softmax.
std::vector<double> restricted_log_softmax(const double *logits, const std::vector<int> &allowed) {
  std::vector<double> x(allowed.size());
  for (std::size_t k = 0; k < allowed.size(); ++k) x[k] = logits[allowed[k]];
  return log_softmax(x);
}

std::vector<int> support(const std::vector<double> &m) {
  std::vector<int> out;
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (m[k] > 0) out.push_back(static_cast<int>(k));
  }
  return out;
}

std::vector<double> scatter_exp(const std::vector<double> &logp, const std::vector<int> &allowed,
                                int width) {
  std::vector<double> p(width, 0.0);
  for (std::size_t k = 0; k < allowed.size(); ++k) p[allowed[k]] = std::exp(logp[k]);
  return p;
}

struct ItemResult {
  double loss = 0.0;
  std::map<std::string, Tensor> grads;
};

ItemResult item_loss(const Model &m, const TrainItem &item, Rng &rng, double drop_ratio,
                     bool per_condition, bool with_grad) {
  const int t = 1 + static_cast<int>(rng.uniform_int(m.schedule.T));
  TransitionBlocks blocks = build_blocks(m.marginals, m.schedule.cumulative(t), m.noise.coupling);
  GraphTokens xt = forward_jump_sample(*item.x0, blocks, m.noise.lambda, rng);
  ConditionSet c = drop_conditions(*item.conditions, drop_ratio, rng, per_condition);
  Tape tape;
  DenoiserOutput out = denoise(tape, m.params, m.cfg, xt, c, t);
  Var loss = token_loss(out, *item.x0);
  ItemResult r;
  r.loss = loss.value().data[0];
  if (with_grad) {
    tape.backward(loss);
    r.grads = tape.param_grads();
  }
  return r;
}

}  // namespace

std::string to_string(Conversion c) {
  switch (c) {
    case Conversion::kConnectAll: return "connect_all";
    case Conversion::kLcc: return "lcc";
    case Conversion::kAsIs: return "as_is";
  }
  return "connect_all";
}

Conversion conversion_from_string(const std::string &s) {
  if (s == "connect_all") return Conversion::kConnectAll;
  if (s == "lcc") return Conversion::kLcc;
  if (s == "as_is") return Conversion::kAsIs;
  throw SchemaError("unknown conversion '" + s + "'");
}

void parallel_for(int n, int threads, const std::function<void(int)> &fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto &th : pool) th.join();
  for (auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Model make_model(const Dataset &d, DenoiserConfig cfg, const NoiseConfig &noise, std::uint64_t seed) {
  Model m;
  cfg.f_v = d.vocab.size();
  cfg.n_max = d.n_max;
  cfg.specs = d.specs;
  cfg.validate();
  m.cfg = cfg;
  m.params = init_params(cfg, seed);
  m.noise = noise;
  m.schedule = cosine_schedule(noise.T, noise.s_offset);
  m.marginals = estimate_marginals(d);
  m.size_histogram = d.train_size_histogram();
  m.vocab = d.vocab;
  return m;
}

nlohmann::json model_meta(const Model &m) {
  nlohmann::json j;
  j["format"] = "graphdiff-model";
  j["version"] = 1;
  j["model"] = m.cfg;
  j["noise"] = {{"T", m.noise.T},
                {"s_offset", m.noise.s_offset},
                {"coupling_mode", to_string(m.noise.coupling)},
                {"lambda_couple", m.noise.lambda}};
  j["marginals"] = marginals_to_json(m.marginals);
  j["size_histogram"] = m.size_histogram;
  j["vocab"] = m.vocab.symbols();
  return j;
}

Model model_from_meta(const nlohmann::json &meta, ParamStore params) {
  try {
    if (meta.at("format") != "graphdiff-model" || meta.at("version") != 1)
      throw CompatibilityError("not a graphdiff model checkpoint");
    Model m;
    m.cfg = meta.at("model").get<DenoiserConfig>();
    const auto &nz = meta.at("noise");
    m.noise.T = nz.at("T").get<int>();
    m.noise.s_offset = nz.at("s_offset").get<double>();
    m.noise.coupling = coupling_from_string(nz.at("coupling_mode").get<std::string>());
    m.noise.lambda = nz.at("lambda_couple").get<double>();
    m.schedule = cosine_schedule(m.noise.T, m.noise.s_offset);
    m.marginals = marginals_from_json(meta.at("marginals"));
    m.size_histogram = meta.at("size_histogram").get<std::vector<double>>();
    auto symbols = meta.at("vocab").get<std::vector<std::string>>();
    std::vector<std::string> elements;
    for (const auto &s : symbols) {
      if (s != AtomVocab::kPad && s != AtomVocab::kWildcard) elements.push_back(s);
    }
    m.vocab = AtomVocab::from_symbols(elements);
    if (m.vocab.symbols() != symbols) throw CompatibilityError("vocabulary order is not canonical");
    if (m.vocab.size() != m.cfg.f_v || m.marginals.f_v() != m.cfg.f_v)
      throw CompatibilityError("vocabulary size does not match the model");
    if (static_cast<int>(m.size_histogram.size()) != m.cfg.n_max + 1)
      throw CompatibilityError("size histogram does not match n_max");
    m.cfg.validate();
    ParamStore expected = init_params(m.cfg, 0);
    for (const auto &name : expected.names()) {
      if (!params.contains(name)) throw CompatibilityError("checkpoint lacks parameter '" + name + "'");
      if (params.get(name).shape != expected.get(name).shape)
        throw CompatibilityError("parameter '" + name + "' has the wrong shape");
    }
    if (params.names().size() != expected.names().size())
      throw CompatibilityError("checkpoint has unexpected parameters");
    m.params = std::move(params);
    return m;
  } catch (const CompatibilityError &) {
    throw;
  } catch (const Error &e) {
    throw CompatibilityError(std::string("model description: ") + e.what());
  } catch (const nlohmann::json::exception &e) {
    throw CompatibilityError(std::string("model description: ") + e.what());
  }
}

Var token_loss(const DenoiserOutput &out, const GraphTokens &x0) {
  const int n = x0.n_max(), real = x0.num_real();
  std::vector<int> node_t(n);
  std::vector<double> node_w(n, 0.0);
  for (int i = 0; i < n; ++i) {
    node_t[i] = x0.node(i);
    node_w[i] = i < real ? 1.0 : 0.0;
  }
  Var loss = cross_entropy(out.node_logits, node_t, node_w);
  if (real < 2) return loss;
  std::vector<int> edge_t(static_cast<std::size_t>(n) * n);
  std::vector<double> edge_w(edge_t.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      edge_t[i * n + j] = x0.edge(i, j);
      if (i < j && j < real) edge_w[i * n + j] = 1.0;
    }
  }
  return add(loss, cross_entropy(out.edge_logits, edge_t, edge_w));
}

double train_step(Model &m, const std::vector<TrainItem> &batch, const TrainConfig &cfg,
                  std::uint64_t seed) {
  if (batch.empty()) throw EmptyInput("empty training batch");
  const auto step = static_cast<std::uint64_t>(m.params.step);
  const int b = static_cast<int>(batch.size());
  std::vector<ItemResult> results(b);
  parallel_for(b, cfg.threads, [&](int i) {
    Rng rng(derive_seed(seed, step, static_cast<std::uint64_t>(i)));
    results[i] = item_loss(m, batch[i], rng, cfg.drop_ratio, cfg.per_condition_drop, true);
  });
  double loss = 0.0;
  std::map<std::string, Tensor> grads;
  for (auto &r : results) {
    loss += r.loss;
    for (auto &[name, g] : r.grads) {
      auto it = grads.find(name);
      if (it == grads.end()) {
        grads.emplace(name, std::move(g));
      } else {
        for (std::size_t k = 0; k < g.data.size(); ++k) it->second.data[k] += g.data[k];
      }
    }
  }
  for (auto &[name, g] : grads) {
    for (double &v : g.data) v /= b;
  }
  loss /= b;
  if (!std::isfinite(loss)) throw NumericError("training loss is not finite");
  OptConfig opt;
  opt.kind = cfg.optimizer;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;
  opt_step(m.params, grads, opt);
  return loss;
}

double eval_loss(const Model &m, const std::vector<TrainItem> &items, std::uint64_t seed, int threads) {
  if (items.empty()) throw EmptyInput("no items to evaluate");
  const int n = static_cast<int>(items.size());
  std::vector<double> losses(n);
  parallel_for(n, threads, [&](int i) {
    Rng rng(derive_seed(seed, kValStream, static_cast<std::uint64_t>(i)));
    losses[i] = item_loss(m, items[i], rng, 0.0, false, false).loss;
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / n;
}

std::vector<double> guidance_combine(const std::vector<double> &logp_uncond,
                                     const std::vector<double> &logp_cond, double s_guide) {
  if (logp_uncond.size() != logp_cond.size()) throw ShapeError("guidance inputs differ in length");
  if (logp_uncond.empty()) throw ShapeError("guidance inputs are empty");
  std::vector<double> x(logp_uncond.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(logp_uncond[k]) || !std::isfinite(logp_cond[k]))
      throw NumericError("guidance inputs must be finite");
    x[k] = (1.0 - s_guide) * logp_uncond[k] + s_guide * logp_cond[k];
  }
  return log_softmax(x);
}

CleanPrediction predict_clean(const Model &m, const GraphTokens &xt, const ConditionSet &c, int t,
                              double s_guide) {
  const int n = m.cfg.n_max, fv = m.cfg.f_v, fe = m.cfg.f_e(), real = xt.num_real();
  // s = 0 and s = 1 need one branch only: (1-s)*a + s*a == a exactly.
  Tape tape_c, tape_u;
  std::optional<DenoiserOutput> cond, uncond;
  if (s_guide != 0.0) cond = denoise(tape_c, m.params, m.cfg, xt, c, t);
  if (s_guide != 1.0) uncond = denoise(tape_u, m.params, m.cfg, xt, ConditionSet::null(c.values.size()), t);
  const DenoiserOutput &oc = cond ? *cond : *uncond, &ou = uncond ? *uncond : *cond;

  // Classes absent from the training marginals (PAD among them) are never
  // proposed as clean states.
  const std::vector<int> node_ok = support(m.marginals.m_v), edge_ok = support(m.marginals.m_e);
  CleanPrediction pred;
  const Tensor &nc = oc.node_logits.value(), &nu = ou.node_logits.value();
  for (int i = 0; i < real; ++i) {
    auto lc = restricted_log_softmax(&nc.data[static_cast<std::size_t>(i) * fv], node_ok);
    auto lu = restricted_log_softmax(&nu.data[static_cast<std::size_t>(i) * fv], node_ok);
    pred.nodes.push_back(scatter_exp(guidance_combine(lu, lc, s_guide), node_ok, fv));
  }
  const Tensor &ec = oc.edge_logits.value(), &eu = ou.edge_logits.value();
  for (int i = 0; i < real; ++i) {
    for (int j = i + 1; j < real; ++j) {
      const std::size_t r = static_cast<std::size_t>(i * n + j) * fe;
      auto lc = restricted_log_softmax(&ec.data[r], edge_ok);
      auto lu = restricted_log_softmax(&eu.data[r], edge_ok);
      pred.edges.push_back(scatter_exp(guidance_combine(lu, lc, s_guide), edge_ok, fe));
    }
  }
  return pred;
}

std::vector<double> reverse_law(int x_t, const std::vector<double> &p_hat, int t,
                                const NoiseSchedule &sched, const Marginals &m, TokenKind kind) {
  const int f = static_cast<int>(p_hat.size());
  std::vector<double> out(f, 0.0);
  double total = 0.0;
  for (int x0 = 0; x0 < f; ++x0) {
    if (p_hat[x0] <= 0.0) continue;
    double z = 0.0;
    auto q = posterior(x_t, x0, t, sched, m, kind, &z);
    if (z <= 0.0) continue;  // x0 cannot reach x_t
    for (int s = 0; s < f; ++s) out[s] += p_hat[x0] * q[s];
    total += p_hat[x0];
  }
  if (total <= 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    out[x_t] = 1.0;
    return out;
  }
  for (double &v : out) v /= total;
  return out;
}

GraphTokens reverse_step(const GraphTokens &xt, int t, const CleanPrediction &pred,
                         const NoiseSchedule &sched, const Marginals &m, Rng &rng) {
  const int real = xt.num_real();
  if (static_cast<int>(pred.nodes.size()) != real ||
      static_cast<int>(pred.edges.size()) != real * (real - 1) / 2)
    throw ShapeError("clean prediction does not match the tokens");
  GraphTokens out(xt.n_max(), xt.f_v());
  for (int i = 0; i < real; ++i) {
    auto law = reverse_law(xt.node(i), pred.nodes[i], t, sched, m, TokenKind::kNode);
    out.set_node(i, static_cast<int>(rng.categorical(law)));
  }
  std::size_t k = 0;
  for (int i = 0; i < real; ++i) {
    for (int j = i + 1; j < real; ++j, ++k) {
      auto law = reverse_law(xt.edge(i, j), pred.edges[k], t, sched, m, TokenKind::kEdge);
      out.set_edge(i, j, static_cast<int>(rng.categorical(law)));
    }
  }
  return out;
}

GraphTokens denoise_step(const Model &m, const GraphTokens &xt, int t, const ConditionSet &c,
                         double s_guide, Rng &rng) {
  if (t < 1 || t > m.schedule.T) throw RangeError("denoise_step needs 1 <= t <= T");
  return reverse_step(xt, t, predict_clean(m, xt, c, t, s_guide), m.schedule, m.marginals, rng);
}

int draw_atom_count(const std::vector<double> &size_histogram, Rng &rng) {
  double total = 0.0;
  for (double v : size_histogram) total += v;
  if (total <= 0.0) throw EmptyDataset("atom-count histogram is empty");
  return static_cast<int>(rng.categorical(size_histogram));
}

SampleResult sample_one(const Model &m, const ConditionSet &c, const SampleConfig &cfg, Rng &rng) {
  if (!(cfg.s_guide >= 0.0)) throw RangeError("s_guide must be >= 0");
  validate_conditions(c, m.specs());
  const int n = cfg.n_atoms > 0 ? cfg.n_atoms : draw_atom_count(m.size_histogram, rng);
  if (n > m.cfg.n_max) throw RangeError("n_atoms exceeds n_max");
  GraphTokens x = stationary_sample(m.marginals, n, m.cfg.n_max, rng);
  for (int t = m.schedule.T; t >= 1; --t) x = denoise_step(m, x, t, c, cfg.s_guide, rng);
  SampleResult r;
  r.raw = x;
  MolecularGraph g = from_tokens(x);
  switch (cfg.conversion) {
    case Conversion::kConnectAll: r.graph = connect_components(g, m.vocab, rng); break;
    case Conversion::kLcc: r.graph = largest_component(g, m.vocab); break;
    case Conversion::kAsIs: r.graph = std::move(g); break;
  }
  return r;
}

std::vector<SampleResult> sample_many(const Model &m, const std::vector<ConditionSet> &conds,
                                      const SampleConfig &cfg) {
  const int n = static_cast<int>(conds.size());
  std::vector<SampleResult> out(n);
  parallel_for(n, cfg.threads, [&](int k) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
    out[k] = sample_one(m, conds[k], cfg, rng);
  });
  return out;
}

nlohmann::json to_json(const EpochLog &e) {
  nlohmann::json j;
  j["epoch"] = e.epoch;
  j["step"] = e.step;
  j["train_loss"] = e.train_loss;
  j["val_loss"] = e.val_loss;
  j["val_validity"] = e.val_validity;
  nlohmann::json ce = nlohmann::json::object();
  for (const auto &[name, v] : e.val_condition_error) ce[name] = v;
  j["val_condition_error"] = ce;
  j["seconds"] = e.seconds;
  return j;
}

TrainResult train(Model &m, const Dataset &d, const TrainConfig &cfg, std::uint64_t seed,
                  int start_epoch, const std::function<bool(const EpochLog &, const Model &)> &on_epoch) {
  if (cfg.batch_size < 1) throw RangeError("batch size must be >= 1");
  if (!(cfg.drop_ratio >= 0.0 && cfg.drop_ratio <= 1.0)) throw RangeError("drop_ratio must lie in [0, 1]");
  if (d.splits.train.empty()) throw EmptyDataset("training split is empty");
  std::vector<GraphTokens> tokens(d.records.size());
  for (std::size_t i = 0; i < d.records.size(); ++i)
    tokens[i] = to_tokens(d.records[i].graph, d.vocab, m.cfg.n_max);
  auto items_of = [&](const std::vector<int> &idx) {
    std::vector<TrainItem> items;
    for (int i : idx) items.push_back({&tokens[i], &d.records[i].conditions});
    return items;
  };
  const std::vector<int> &val_idx = d.splits.valid.empty() ? d.splits.train : d.splits.valid;
  const std::vector<TrainItem> val_items = items_of(val_idx);

  TrainResult result;
  result.best = m.params;
  result.best_epoch = start_epoch;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<int> order = d.splits.train;
    Rng shuffle_rng(derive_seed(seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      std::vector<int> idx(order.begin() + b, order.begin() + std::min(order.size(), b + cfg.batch_size));
      loss_sum += train_step(m, items_of(idx), cfg, seed);
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.step = m.params.step;
    log.train_loss = loss_sum / batches;
    log.val_loss = eval_loss(m, val_items, seed, cfg.threads);
    if (cfg.val_samples > 0) {
      std::vector<ConditionSet> conds;
      for (int k = 0; k < cfg.val_samples; ++k) conds.push_back(d.records[val_idx[k % val_idx.size()]].conditions);
      SampleConfig sc;
      sc.s_guide = cfg.val_s_guide;
      sc.seed = derive_seed(seed, kValSampleStream);
      sc.threads = cfg.threads;
      auto samples = sample_many(m, conds, sc);
      int valid = 0;
      for (const auto &s : samples) valid += is_valid(s.graph, m.vocab) ? 1 : 0;
      log.val_validity = static_cast<double>(valid) / cfg.val_samples;
      for (std::size_t c = 0; c < m.specs().size(); ++c) {
        const auto &spec = m.specs()[c];
        double err = 0.0;
        int count = 0;
        for (int k = 0; k < cfg.val_samples; ++k) {
          auto target = conds[k].values[c];
          auto value = exact_oracle(spec, samples[k].graph, m.vocab);
          if (!target || !value) continue;
          // numeric: absolute error; categorical: accuracy
          err += spec.numeric() ? std::abs(*value - *target) : (*value == *target ? 1.0 : 0.0);
          ++count;
        }
        if (count > 0) log.val_condition_error.emplace_back(spec.name, err / count);
      }
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log.val_loss < result.best_val_loss) {
      result.best_val_loss = log.val_loss;
      result.best_epoch = epoch;
      result.best = m.params;
    }
    result.log.push_back(log);
    if (on_epoch && !on_epoch(log, m)) break;
  }
  return result;
}

}  // namespace graphdiff
