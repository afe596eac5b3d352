#include "graphdiff/tokens.hpp"

#include "graphdiff/error.hpp"

namespace graphdiff {

GraphTokens::GraphTokens(int n_max, int f_v)
    : n_max_(n_max), f_v_(f_v), nodes_(n_max, f_v - 1), edges_(n_max * n_max, 0) {}

int GraphTokens::num_real() const {
  int n = 0;
  for (int i = 0; i < n_max_; ++i) n += real(i);
  return n;
}

std::vector<bool> GraphTokens::mask() const {
  std::vector<bool> m(n_max_);
  for (int i = 0; i < n_max_; ++i) m[i] = real(i);
  return m;
}

std::vector<double> GraphTokens::dense() const {
  const int fg = f_g();
  std::vector<double> out(static_cast<std::size_t>(n_max_) * fg, 0.0);
  for (int i = 0; i < n_max_; ++i) {
    double *row = out.data() + static_cast<std::size_t>(i) * fg;
    row[nodes_[i]] = 1.0;
    for (int j = 0; j < n_max_; ++j) row[f_v_ + j * f_e() + edge(i, j)] = 1.0;
  }
  return out;
}

GraphTokens GraphTokens::from_dense(std::span<const double> values, int n_max, int f_v) {
  GraphTokens t(n_max, f_v);
  const int fg = t.f_g();
  if (values.size() != static_cast<std::size_t>(n_max) * fg)
    throw ShapeError("dense token matrix has the wrong size");
  auto argmax = [](const double *p, int n) {
    int best = 0;
    for (int k = 1; k < n; ++k) {
      if (p[k] > p[best]) best = k;
    }
    return best;
  };
  for (int i = 0; i < n_max; ++i) {
    const double *row = values.data() + static_cast<std::size_t>(i) * fg;
    t.nodes_[i] = argmax(row, f_v);
    for (int j = 0; j < n_max; ++j) t.edges_[i * n_max + j] = argmax(row + f_v + j * f_e(), f_e());
  }
  return t;
}

bool GraphTokens::satisfies_invariants() const {
  if (static_cast<int>(nodes_.size()) != n_max_ ||
      static_cast<int>(edges_.size()) != n_max_ * n_max_)
    return false;
  bool seen_pad = false;
  for (int i = 0; i < n_max_; ++i) {
    if (nodes_[i] < 0 || nodes_[i] >= f_v_) return false;
    if (!real(i)) {
      seen_pad = true;
    } else if (seen_pad) {
      return false;
    }
    for (int j = 0; j < n_max_; ++j) {
      int e = edge(i, j);
      if (e < 0 || e >= f_e()) return false;
      if (e != edge(j, i)) return false;
      if ((i == j || !real(i) || !real(j)) && e != 0) return false;
    }
  }
  return true;
}

GraphTokens to_tokens(const MolecularGraph &g, const AtomVocab &vocab, int n_max) {
  if (g.num_atoms() > n_max)
    throw SizeError("graph has " + std::to_string(g.num_atoms()) + " atoms, N_max is " +
                    std::to_string(n_max));
  GraphTokens t(n_max, vocab.size());
  for (int i = 0; i < g.num_atoms(); ++i) {
    if (g.atom(i) == vocab.pad()) throw RangeError("graph contains a PAD atom");
    t.set_node(i, g.atom(i));
  }
  for (const auto &b : g.bonds()) t.set_edge(b.a, b.b, static_cast<int>(b.kind));
  return t;
}

MolecularGraph from_tokens(const GraphTokens &t) {
  MolecularGraph g;
  std::vector<int> index(t.n_max(), -1);
  for (int i = 0; i < t.n_max(); ++i) {
    if (t.real(i)) index[i] = g.add_atom(t.node(i));
  }
  for (int i = 0; i < t.n_max(); ++i) {
    for (int j = i + 1; j < t.n_max(); ++j) {
      if (index[i] < 0 || index[j] < 0) continue;
      int e = t.edge(i, j);
      if (e != 0) g.add_bond(index[i], index[j], BondVocab::kind(e));
    }
  }
  return g;
}

}  // namespace graphdiff
