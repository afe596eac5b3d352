#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "graphdiff/molgraph.hpp"

namespace graphdiff {

// Fixed-width graph tokens. Row i of the dense view is
//   [ node one-hot (F_V) | edge one-hot to atom 0 (F_E) | ... | to atom N-1 ]
// so F_G = F_V + N_max * F_E. Storage keeps the class index of every one-hot
// block; `dense()` materializes the N_max x F_G matrix.
class GraphTokens {
 public:
  GraphTokens() = default;
  GraphTokens(int n_max, int f_v);

  int n_max() const { return n_max_; }
  int f_v() const { return f_v_; }
  static constexpr int f_e() { return BondVocab::kSize; }
  int f_g() const { return f_v_ + n_max_ * f_e(); }
  int pad() const { return f_v_ - 1; }

  int node(int i) const { return nodes_[i]; }
  int edge(int i, int j) const { return edges_[i * n_max_ + j]; }
  void set_node(int i, int cls) { nodes_[i] = cls; }
  // Sets both (i, j) and (j, i).
  void set_edge(int i, int j, int cls) {
    edges_[i * n_max_ + j] = cls;
    edges_[j * n_max_ + i] = cls;
  }
  bool real(int i) const { return nodes_[i] != pad(); }
  int num_real() const;
  std::vector<bool> mask() const;

  const std::vector<int> &nodes() const { return nodes_; }
  const std::vector<int> &edges() const { return edges_; }

  // Row-major N_max x F_G one-hot matrix.
  std::vector<double> dense() const;
  static GraphTokens from_dense(std::span<const double> values, int n_max, int f_v);

  // One-hot blocks, edge symmetry, "none" diagonal and PAD-adjacent slots,
  // and real atoms packed before PAD rows.
  bool satisfies_invariants() const;

  bool operator==(const GraphTokens &) const = default;

 private:
  int n_max_ = 0;
  int f_v_ = 0;
  std::vector<int> nodes_;
  std::vector<int> edges_;
};

// Throws SizeError when the graph has more than n_max atoms.
GraphTokens to_tokens(const MolecularGraph &g, const AtomVocab &vocab, int n_max);
// Drops PAD rows and "none" edges.
MolecularGraph from_tokens(const GraphTokens &t);

}  // namespace graphdiff
