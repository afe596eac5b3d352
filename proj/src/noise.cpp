#include "graphdiff/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "graphdiff/error.hpp"

namespace graphdiff {

namespace {

std::vector<double> normalized(std::vector<double> v) {
  double z = 0.0;
  for (double x : v) z += x;
  if (z > 0) {
    for (double &x : v) x /= z;
  }
  return v;
}

double row_sum(const std::vector<double> &v) {
  double z = 0.0;
  for (double x : v) z += x;
  return z;
}

Matrix marginal_block(const std::vector<double> &m, double a) {
  const int f = static_cast<int>(m.size());
  Matrix q(f, std::vector<double>(f));
  for (int i = 0; i < f; ++i) {
    for (int j = 0; j < f; ++j) q[i][j] = (i == j ? a : 0.0) + (1.0 - a) * m[j];
  }
  return q;
}

Matrix cross_block(const Matrix &rows, double a, CouplingMode mode) {
  Matrix q = rows;
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = 0; j < q[i].size(); ++j) {
      q[i][j] *= 1.0 - a;
      if (mode == CouplingMode::kLiteral && i == j) q[i][j] += a;
    }
  }
  return q;
}

}  // namespace

NoiseSchedule cosine_schedule(int T, double s_offset) {
  if (T < 1) throw RangeError("schedule needs T >= 1");
  if (!(s_offset >= 0)) throw RangeError("schedule offset must be >= 0");
  NoiseSchedule s;
  s.T = T;
  s.s_offset = s_offset;
  s.abar.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    double c = std::cos(0.5 * std::numbers::pi * (static_cast<double>(t) / T + s_offset) /
                        (1.0 + s_offset));
    s.abar[t] = c * c;
  }
  s.abar[T] = 0.0;
  s.alpha.assign(T + 1, 1.0);
  for (int t = 1; t <= T; ++t) s.alpha[t] = s.cumulative(t) / s.cumulative(t - 1);
  return s;
}

Marginals estimate_marginals(const std::vector<MolecularGraph> &graphs, const AtomVocab &vocab) {
  if (graphs.empty()) throw EmptyDataset("no molecules to estimate marginals from");
  const int fv = vocab.size(), fe = BondVocab::kSize;
  std::vector<double> nv(fv, 0.0), ne(fe, 0.0);
  Matrix c(fe, std::vector<double>(fv, 0.0));
  for (const auto &g : graphs) {
    const int n = g.num_atoms();
    for (int a : g.atoms()) nv[a] += 1.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        int k = static_cast<int>(g.bond_between(i, j));
        ne[k] += 1.0;
        c[k][g.atom(i)] += 1.0;
        c[k][g.atom(j)] += 1.0;
      }
    }
  }
  Marginals m;
  nv[vocab.pad()] = 0.0;
  m.m_v = normalized(nv);
  m.m_e = row_sum(ne) > 0 ? normalized(ne) : std::vector<double>{1, 0, 0, 0, 0};
  m.m_ev.resize(fe);
  for (int k = 0; k < fe; ++k) m.m_ev[k] = row_sum(c[k]) > 0 ? normalized(c[k]) : m.m_v;
  m.m_ve.assign(fv, std::vector<double>(fe, 0.0));
  for (int v = 0; v < fv; ++v) {
    std::vector<double> col(fe);
    for (int k = 0; k < fe; ++k) col[k] = c[k][v];
    if (v == vocab.pad()) {
      m.m_ve[v][0] = 1.0;
    } else {
      m.m_ve[v] = nv[v] > 0 && row_sum(col) > 0 ? normalized(col) : m.m_e;
    }
  }
  return m;
}

Marginals estimate_marginals(const Dataset &d) {
  std::vector<MolecularGraph> graphs;
  for (int i : d.splits.train) graphs.push_back(d.records[i].graph);
  if (graphs.empty()) throw EmptyDataset("training split is empty");
  return estimate_marginals(graphs, d.vocab);
}

std::string to_string(CouplingMode m) {
  return m == CouplingMode::kLiteral ? "literal" : "self_preserving";
}

CouplingMode coupling_from_string(const std::string &s) {
  if (s == "self_preserving") return CouplingMode::kSelfPreserving;
  if (s == "literal") return CouplingMode::kLiteral;
  throw SchemaError("unknown coupling mode '" + s + "'");
}

TransitionBlocks build_blocks(const Marginals &m, double abar, CouplingMode mode) {
  if (!(abar >= 0.0 && abar <= 1.0)) throw RangeError("abar must lie in [0, 1]");
  TransitionBlocks b;
  b.abar = abar;
  b.mode = mode;
  b.q_v = marginal_block(m.m_v, abar);
  b.q_e = marginal_block(m.m_e, abar);
  b.q_ev = cross_block(m.m_ev, abar, mode);
  b.q_ve = cross_block(m.m_ve, abar, mode);
  return b;
}

GraphTokens forward_sample(const GraphTokens &x, const TransitionBlocks &blocks, double lambda,
                           Rng &rng) {
  const int fv = x.f_v(), fe = GraphTokens::f_e(), n = x.n_max();
  if (static_cast<int>(blocks.q_v.size()) != fv || static_cast<int>(blocks.q_e.size()) != fe)
    throw ShapeError("transition blocks do not match the token vocabulary");
  if (!(lambda >= 0)) throw RangeError("coupling weight must be >= 0");
  const int pad = x.pad();
  const int real = x.num_real();
  GraphTokens out(n, fv);
  std::vector<double> p(fv);
  for (int i = 0; i < real; ++i) {
    p = blocks.q_v[x.node(i)];
    if (lambda > 0 && real > 1) {
      std::vector<double> cross(fv, 0.0);
      for (int j = 0; j < real; ++j) {
        if (j == i) continue;
        const auto &row = blocks.q_ev[x.edge(i, j)];
        for (int v = 0; v < fv; ++v) cross[v] += row[v];
      }
      for (int v = 0; v < fv; ++v) p[v] += lambda * cross[v] / (real - 1);
    }
    p[pad] = 0.0;
    out.set_node(i, static_cast<int>(rng.categorical(p)));
  }
  std::vector<double> q(fe);
  for (int i = 0; i < real; ++i) {
    for (int j = i + 1; j < real; ++j) {
      if (blocks.mode == CouplingMode::kLiteral) {
        std::fill(q.begin(), q.end(), 0.0);
        int count = 0;
        for (int r : {i, j}) {
          for (int k = 0; k < real; ++k) {
            if (k == r) continue;
            const auto &row = blocks.q_e[x.edge(r, k)];
            for (int e = 0; e < fe; ++e) q[e] += row[e];
            ++count;
          }
        }
        for (double &v : q) v /= count;
      } else {
        q = blocks.q_e[x.edge(i, j)];
      }
      if (lambda > 0) {
        const auto &a = blocks.q_ve[x.node(i)], &b = blocks.q_ve[x.node(j)];
        for (int e = 0; e < fe; ++e) q[e] += lambda * 0.5 * (a[e] + b[e]);
      }
      out.set_edge(i, j, static_cast<int>(rng.categorical(q)));
    }
  }
  return out;
}

GraphTokens forward_jump_sample(const GraphTokens &x0, const TransitionBlocks &blocks, double lambda,
                                Rng &rng) {
  return forward_sample(x0, blocks, lambda, rng);
}

GraphTokens forward_step_sample(const GraphTokens &x_prev, const TransitionBlocks &blocks,
                                double lambda, Rng &rng) {
  return forward_sample(x_prev, blocks, lambda, rng);
}

std::vector<double> posterior(int x_t, int x0, int t, const NoiseSchedule &sched,
                              const Marginals &m, TokenKind kind, double *normalizer) {
  if (t < 1 || t > sched.T) throw RangeError("posterior needs 1 <= t <= T");
  const std::vector<double> &mv = kind == TokenKind::kNode ? m.m_v : m.m_e;
  const int f = static_cast<int>(mv.size());
  const double a = sched.alpha[t];
  const double abar_prev = sched.cumulative(t - 1);
  std::vector<double> q(f);
  double z = 0.0;
  for (int s = 0; s < f; ++s) {
    double step = (s == x_t ? a : 0.0) + (1.0 - a) * mv[x_t];
    double cum = (x0 == s ? abar_prev : 0.0) + (1.0 - abar_prev) * mv[s];
    q[s] = step * cum;
    z += q[s];
  }
  if (normalizer) *normalizer = z;
  if (z <= 0.0) {
    std::fill(q.begin(), q.end(), 0.0);
    q[x_t] = 1.0;
    return q;
  }
  for (double &v : q) v /= z;
  return q;
}

Matrix posterior_table(int x_t, int t, const NoiseSchedule &sched, const Marginals &m,
                       TokenKind kind) {
  const int f = kind == TokenKind::kNode ? m.f_v() : m.f_e();
  Matrix out(f);
  for (int x0 = 0; x0 < f; ++x0) out[x0] = posterior(x_t, x0, t, sched, m, kind);
  return out;
}

GraphTokens stationary_sample(const Marginals &m, int n_atoms, int n_max, Rng &rng) {
  if (n_atoms < 1 || n_atoms > n_max) throw RangeError("n_atoms must lie in [1, n_max]");
  GraphTokens out(n_max, m.f_v());
  std::vector<double> pv = m.m_v;
  pv[out.pad()] = 0.0;
  for (int i = 0; i < n_atoms; ++i) out.set_node(i, static_cast<int>(rng.categorical(pv)));
  for (int i = 0; i < n_atoms; ++i) {
    for (int j = i + 1; j < n_atoms; ++j) out.set_edge(i, j, static_cast<int>(rng.categorical(m.m_e)));
  }
  return out;
}

TokenHistogram token_histogram(const std::vector<GraphTokens> &samples, int f_v) {
  TokenHistogram h;
  h.nodes.assign(f_v, 0.0);
  h.edges.assign(GraphTokens::f_e(), 0.0);
  for (const auto &x : samples) {
    const int real = x.num_real();
    for (int i = 0; i < real; ++i) {
      h.nodes[x.node(i)] += 1.0;
      for (int j = i + 1; j < real; ++j) h.edges[x.edge(i, j)] += 1.0;
    }
  }
  h.nodes = normalized(h.nodes);
  h.edges = normalized(h.edges);
  return h;
}

double total_variation(const std::vector<double> &p, const std::vector<double> &q) {
  if (p.size() != q.size()) throw ShapeError("distributions differ in length");
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) d += std::abs(p[k] - q[k]);
  return 0.5 * d;
}

nlohmann::json to_json(const NoiseSchedule &s) {
  return {{"T", s.T}, {"s_offset", s.s_offset}, {"abar", s.abar}, {"alpha", s.alpha}};
}

nlohmann::json marginals_to_json(const Marginals &m) {
  return {{"m_v", m.m_v}, {"m_e", m.m_e}, {"m_ev", m.m_ev}, {"m_ve", m.m_ve}};
}

nlohmann::json to_json(const Marginals &m, const AtomVocab &vocab) {
  nlohmann::json j = marginals_to_json(m);
  j["atom_types"] = vocab.symbols();
  std::vector<std::string> bonds;
  for (int k = 0; k < BondVocab::kSize; ++k) bonds.emplace_back(BondVocab::name(BondVocab::kind(k)));
  j["bond_types"] = bonds;
  return j;
}

Marginals marginals_from_json(const nlohmann::json &j) {
  Marginals m;
  m.m_v = j.at("m_v").get<std::vector<double>>();
  m.m_e = j.at("m_e").get<std::vector<double>>();
  m.m_ev = j.at("m_ev").get<Matrix>();
  m.m_ve = j.at("m_ve").get<Matrix>();
  if (m.f_e() != BondVocab::kSize || static_cast<int>(m.m_ev.size()) != m.f_e() ||
      static_cast<int>(m.m_ve.size()) != m.f_v())
    throw CompatibilityError("marginal shapes are inconsistent");
  return m;
}

}  // namespace graphdiff
