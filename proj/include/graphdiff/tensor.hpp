#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "graphdiff/rng.hpp"

namespace graphdiff {

// Dense row-major 64-bit tensor. Everything in the engine is rank 1 or 2.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int> shape_, double fill = 0.0);
  Tensor(std::vector<int> shape_, std::vector<double> values);
  static Tensor matrix(int rows, int cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }
  static Tensor vector(std::vector<double> values);

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  // Rank 1 tensors behave as a single row.
  int rows() const { return rank() == 2 ? shape[0] : 1; }
  int cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : 1); }
  double &at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }
  bool all_finite() const;
  bool operator==(const Tensor &) const = default;
};

// Population mean and sqrt(var + 1e-5). Terms are summed in sorted order so
// the result does not depend on element order.
std::pair<double, double> layer_stats(std::span<const double> h);
inline constexpr double kLayerEps = 1e-5;

// Order-independent sum (sorted, then accumulated).
double sorted_sum(std::vector<double> terms);

class ParamStore;
class Tape;

// Handle to a node on a tape.
struct Var {
  Tape *tape = nullptr;
  int id = -1;

  const Tensor &value() const;
  const std::vector<int> &shape() const { return value().shape; }
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
};

// Records operations in creation order; backward walks them in reverse.
class Tape {
 public:
  Var constant(Tensor t);
  Var leaf(Tensor t);  // differentiable input not owned by a ParamStore
  // Leaf bound to a named parameter; repeated calls return the same node.
  Var param(const ParamStore &store, const std::string &name);

  // Seeds d(loss)/d(loss) = 1. Throws NonScalarLoss unless loss has one
  // element.
  void backward(Var loss);
  const Tensor &grad(Var v) const;
  // Gradients of every parameter used on this tape (zeros when unreached).
  std::map<std::string, Tensor> param_grads() const;

  const Tensor &value(int id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  // Internal: appends an op node. `back` receives the output gradient and
  // accumulates into parents through add_grad.
  Var push(Tensor value, std::vector<int> parents, std::function<void(Tape &, const Tensor &)> back);
  void add_grad(int id, const Tensor &g);
  void add_grad(int id, std::size_t k, double g);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Tape &, const Tensor &)> back;
  };
  std::vector<Node> nodes_;
  std::map<std::string, int> params_;
};

// Ops. Shapes: matrices are [rows, cols]; "row" operands are rank-1 or 1 x n
// and broadcast over rows. Each throws ShapeError on mismatch and
// NumericError when its output is not finite.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);
Var mul_row(Var a, Var row);
Var scale(Var a, double s);
Var transpose(Var a);
Var concat_cols(const std::vector<Var> &parts);
Var concat_rows(const std::vector<Var> &parts);
Var slice_cols(Var a, int begin, int end);
Var slice_rows(Var a, int begin, int end);
Var reshape(Var a, std::vector<int> shape);
Var silu(Var a);
// Row-wise softmax. Entries whose key_mask is false get probability 0; an
// empty key_mask keeps every column.
Var softmax_rows(Var a, const std::vector<bool> &key_mask = {});
// Row-wise (h - mean) / sqrt(var + eps), no affine.
Var normalize_rows(Var a);
// out[i, :] = sum_j p[i, j] v[j, :], each element summed in sorted order.
Var attend(Var p, Var v);
// out[r, c] = table[idx[r], c].
Var gather_rows(Var table, const std::vector<int> &idx);
// out[i, j] = table[idx[i * n + j], col] for an n x n index grid.
Var gather_grid(Var table, const std::vector<int> &idx, int n, int col);
// Row i*n + j of the output is a[i] (elementwise) a[j] for an n x d input.
Var pair_products(Var a);
Var sum(Var a);
// Mean over positions with weight > 0 of -log softmax(logits[r])[target[r]],
// each term multiplied by its weight, divided by the total weight. Throws
// ShapeError when every weight is zero.
Var cross_entropy(Var logits, const std::vector<int> &target, const std::vector<double> &weight);

// Plain (tape-free) helpers.
std::vector<double> softmax(std::span<const double> x);
std::vector<double> log_softmax(std::span<const double> x);

struct ParamState {
  Tensor value;
  Tensor m;
  Tensor v;
};

// Named parameters in insertion order with AdamW moments.
class ParamStore {
 public:
  void add(const std::string &name, Tensor value);
  bool contains(const std::string &name) const { return index_.count(name) > 0; }
  const Tensor &get(const std::string &name) const;
  Tensor &get_mut(const std::string &name);
  const std::vector<std::string> &names() const { return order_; }
  ParamState &state(const std::string &name);
  const ParamState &state(const std::string &name) const;
  std::int64_t step = 0;
  std::size_t num_values() const;
  bool operator==(const ParamStore &) const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::size_t> index_;
  std::vector<ParamState> states_;
};

enum class OptKind { kSgd, kAdamW };

struct OptConfig {
  OptKind kind = OptKind::kAdamW;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Applies one update. Missing gradients count as zero; unknown names or
// shape mismatches throw ShapeError.
void opt_step(ParamStore &store, const std::map<std::string, Tensor> &grads, const OptConfig &cfg);

// Uniform(-bound, bound) fill.
Tensor uniform_tensor(std::vector<int> shape, double bound, Rng &rng);

// Max relative error |a - n| / max(|a|, |n|, 1e-6) between tape gradients
// and central differences of `f` over every element of `inputs`.
using LossFn = std::function<Var(Tape &, const std::vector<Var> &)>;
double grad_check(const LossFn &f, const std::vector<Tensor> &inputs, double eps = 1e-5);
// Same over parameters; at most `per_tensor` evenly spaced elements of each
// parameter are perturbed (0 = all).
double grad_check_params(const std::function<Var(Tape &, const ParamStore &)> &f, ParamStore &store,
                         double eps = 1e-5, int per_tensor = 0);

}  // namespace graphdiff
