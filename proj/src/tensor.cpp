#include "graphdiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Core>

#include "graphdiff/error.hpp"

namespace graphdiff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC view(const Tensor &t) { return MapC(t.data.data(), t.rows(), t.cols()); }
Map view(Tensor &t) { return Map(t.data.data(), t.rows(), t.cols()); }

std::string shape_str(const std::vector<int> &s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

void require(bool ok, const char *op, const std::string &what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

Var emit(Tape &tape, const char *op, Tensor value, std::vector<int> parents,
         std::function<void(Tape &, const Tensor &)> back) {
  if (!value.all_finite()) throw NumericError(std::string(op) + " produced a non-finite value");
  return tape.push(std::move(value), std::move(parents), std::move(back));
}

Tape &same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ShapeError("operands live on different tapes");
  return *a.tape;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor::Tensor(std::vector<int> shape_, double fill) : shape(std::move(shape_)) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  data.assign(n, fill);
}

Tensor::Tensor(std::vector<int> shape_, std::vector<double> values)
    : shape(std::move(shape_)), data(std::move(values)) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  if (n != data.size()) throw ShapeError("value count does not match shape " + shape_str(shape));
}

Tensor Tensor::vector(std::vector<double> values) {
  int n = static_cast<int>(values.size());
  return Tensor({n}, std::move(values));
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double x) { return std::isfinite(x); });
}

double sorted_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

std::pair<double, double> layer_stats(std::span<const double> h) {
  const double n = static_cast<double>(h.size());
  double mu = sorted_sum(std::vector<double>(h.begin(), h.end())) / n;
  std::vector<double> sq(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) sq[i] = (h[i] - mu) * (h[i] - mu);
  double var = sorted_sum(std::move(sq)) / n;
  return {mu, std::sqrt(var + kLayerEps)};
}

const Tensor &Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor t) {
  nodes_.push_back(Node{std::move(t), {}, false, nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor t) {
  nodes_.push_back(Node{std::move(t), {}, true, nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(const ParamStore &store, const std::string &name) {
  auto it = params_.find(name);
  if (it != params_.end()) return Var{this, it->second};
  Var v = leaf(store.get(name));
  params_[name] = v.id;
  return v;
}

Var Tape::push(Tensor value, std::vector<int> parents,
               std::function<void(Tape &, const Tensor &)> back) {
  bool needs = std::any_of(parents.begin(), parents.end(), [&](int p) { return nodes_[p].needs_grad; });
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(back) : nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::add_grad(int id, const Tensor &g) {
  Node &n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.data.empty()) {
    n.grad = Tensor(n.value.shape, 0.0);
  }
  for (std::size_t k = 0; k < g.data.size(); ++k) n.grad.data[k] += g.data[k];
}

void Tape::add_grad(int id, std::size_t k, double g) {
  Node &n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.data.empty()) n.grad = Tensor(n.value.shape, 0.0);
  n.grad.data[k] += g;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ShapeError("loss belongs to another tape");
  if (nodes_[loss.id].value.size() != 1) throw NonScalarLoss("backward needs a scalar loss");
  for (auto &n : nodes_) n.grad = Tensor();
  add_grad(loss.id, 0, 1.0);
  for (int id = loss.id; id >= 0; --id) {
    Node &n = nodes_[id];
    if (!n.back || n.grad.data.empty()) continue;
    // callbacks only touch lower ids, so n.grad stays put
    n.back(*this, n.grad);
  }
}

const Tensor &Tape::grad(Var v) const {
  static const Tensor kEmpty;
  return nodes_.at(v.id).grad.data.empty() ? kEmpty : nodes_[v.id].grad;
}

std::map<std::string, Tensor> Tape::param_grads() const {
  std::map<std::string, Tensor> out;
  for (const auto &[name, id] : params_) {
    const Node &n = nodes_[id];
    out[name] = n.grad.data.empty() ? Tensor(n.value.shape, 0.0) : n.grad;
  }
  return out;
}

Var matmul(Var a, Var b) {
  Tape &t = same_tape(a, b);
  const Tensor &A = a.value(), &B = b.value();
  require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.rows(), "matmul",
          shape_str(A.shape) + " x " + shape_str(B.shape));
  Tensor out = Tensor::matrix(A.rows(), B.cols());
  view(out).noalias() = view(A) * view(B);
  int ia = a.id, ib = b.id;
  return emit(t, "matmul", std::move(out), {ia, ib}, [ia, ib](Tape &tp, const Tensor &g) {
    const Tensor &A = tp.value(ia), &B = tp.value(ib);
    if (tp.needs_grad(ia)) {
      Tensor ga(A.shape);
      view(ga).noalias() = view(g) * view(B).transpose();
      tp.add_grad(ia, ga);
    }
    if (tp.needs_grad(ib)) {
      Tensor gb(B.shape);
      view(gb).noalias() = view(A).transpose() * view(g);
      tp.add_grad(ib, gb);
    }
  });
}

namespace {

Var binary(Var a, Var b, const char *op, int kind) {
  Tape &t = same_tape(a, b);
  const Tensor &A = a.value(), &B = b.value();
  require(A.shape == B.shape, op, shape_str(A.shape) + " vs " + shape_str(B.shape));
  Tensor out(A.shape);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double x = A.data[k], y = B.data[k];
    out.data[k] = kind == 0 ? x + y : kind == 1 ? x - y : x * y;
  }
  int ia = a.id, ib = b.id;
  return emit(t, op, std::move(out), {ia, ib}, [ia, ib, kind](Tape &tp, const Tensor &g) {
    if (kind == 2) {
      const Tensor &A = tp.value(ia), &B = tp.value(ib);
      Tensor ga(A.shape), gb(B.shape);
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga.data[k] = g.data[k] * B.data[k];
        gb.data[k] = g.data[k] * A.data[k];
      }
      tp.add_grad(ia, ga);
      tp.add_grad(ib, gb);
      return;
    }
    tp.add_grad(ia, g);
    if (kind == 0) {
      tp.add_grad(ib, g);
    } else {
      Tensor gb = g;
      for (double &x : gb.data) x = -x;
      tp.add_grad(ib, gb);
    }
  });
}

Var row_op(Var a, Var row, const char *op, bool multiply) {
  Tape &t = same_tape(a, row);
  const Tensor &A = a.value(), &R = row.value();
  require(A.rank() == 2 && R.size() == static_cast<std::size_t>(A.cols()) && R.rows() == 1, op,
          shape_str(A.shape) + " with row " + shape_str(R.shape));
  Tensor out(A.shape);
  const int n = A.rows(), m = A.cols();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      out.at(i, j) = multiply ? A.at(i, j) * R.data[j] : A.at(i, j) + R.data[j];
    }
  }
  int ia = a.id, ir = row.id;
  return emit(t, op, std::move(out), {ia, ir}, [ia, ir, multiply, n, m](Tape &tp, const Tensor &g) {
    const Tensor &A = tp.value(ia), &R = tp.value(ir);
    Tensor gr(R.shape);
    if (multiply) {
      Tensor ga(A.shape);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
          ga.at(i, j) = g.at(i, j) * R.data[j];
          gr.data[j] += g.at(i, j) * A.at(i, j);
        }
      }
      tp.add_grad(ia, ga);
    } else {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) gr.data[j] += g.at(i, j);
      }
      tp.add_grad(ia, g);
    }
    tp.add_grad(ir, gr);
  });
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, "add", 0); }
Var sub(Var a, Var b) { return binary(a, b, "sub", 1); }
Var mul(Var a, Var b) { return binary(a, b, "mul", 2); }
Var add_row(Var a, Var row) { return row_op(a, row, "add_row", false); }
Var mul_row(Var a, Var row) { return row_op(a, row, "mul_row", true); }

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double &x : out.data) x *= s;
  int ia = a.id;
  return emit(*a.tape, "scale", std::move(out), {ia}, [ia, s](Tape &tp, const Tensor &g) {
    Tensor ga = g;
    for (double &x : ga.data) x *= s;
    tp.add_grad(ia, ga);
  });
}

Var transpose(Var a) {
  const Tensor &A = a.value();
  require(A.rank() == 2, "transpose", "needs a matrix");
  Tensor out = Tensor::matrix(A.cols(), A.rows());
  view(out) = view(A).transpose();
  int ia = a.id;
  return emit(*a.tape, "transpose", std::move(out), {ia}, [ia](Tape &tp, const Tensor &g) {
    Tensor ga(tp.value(ia).shape);
    view(ga) = view(g).transpose();
    tp.add_grad(ia, ga);
  });
}

Var concat_cols(const std::vector<Var> &parts) {
  require(!parts.empty(), "concat_cols", "no operands");
  Tape &t = *parts[0].tape;
  const int n = parts[0].rows();
  int total = 0;
  std::vector<int> ids, widths;
  for (Var p : parts) {
    require(p.tape == &t && p.value().rank() == 2 && p.rows() == n, "concat_cols", "row mismatch");
    ids.push_back(p.id);
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out = Tensor::matrix(n, total);
  int off = 0;
  for (Var p : parts) {
    view(out).block(0, off, n, p.cols()) = view(p.value());
    off += p.cols();
  }
  return emit(t, "concat_cols", std::move(out), ids, [ids, widths, n](Tape &tp, const Tensor &g) {
    int off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor gk = Tensor::matrix(n, widths[k]);
      view(gk) = view(g).block(0, off, n, widths[k]);
      tp.add_grad(ids[k], gk);
      off += widths[k];
    }
  });
}

Var concat_rows(const std::vector<Var> &parts) {
  require(!parts.empty(), "concat_rows", "no operands");
  Tape &t = *parts[0].tape;
  const int m = parts[0].cols();
  std::vector<int> ids;
  std::vector<double> data;
  int rows = 0;
  for (Var p : parts) {
    require(p.tape == &t && p.cols() == m, "concat_rows", "column mismatch");
    ids.push_back(p.id);
    rows += p.rows();
    data.insert(data.end(), p.value().data.begin(), p.value().data.end());
  }
  Tensor out({rows, m}, std::move(data));
  return emit(t, "concat_rows", std::move(out), ids, [ids](Tape &tp, const Tensor &g) {
    std::size_t off = 0;
    for (int id : ids) {
      const Tensor &v = tp.value(id);
      Tensor gk(v.shape);
      std::copy(g.data.begin() + off, g.data.begin() + off + v.size(), gk.data.begin());
      off += v.size();
      tp.add_grad(id, gk);
    }
  });
}

Var slice_cols(Var a, int begin, int end) {
  const Tensor &A = a.value();
  require(A.rank() == 2 && 0 <= begin && begin <= end && end <= A.cols(), "slice_cols", "bad range");
  const int n = A.rows(), w = end - begin;
  Tensor out = Tensor::matrix(n, w);
  view(out) = view(A).block(0, begin, n, w);
  int ia = a.id;
  return emit(*a.tape, "slice_cols", std::move(out), {ia}, [ia, begin, n, w](Tape &tp, const Tensor &g) {
    Tensor ga(tp.value(ia).shape);
    view(ga).block(0, begin, n, w) = view(g);
    tp.add_grad(ia, ga);
  });
}

Var slice_rows(Var a, int begin, int end) {
  const Tensor &A = a.value();
  require(A.rank() == 2 && 0 <= begin && begin <= end && end <= A.rows(), "slice_rows", "bad range");
  const int m = A.cols();
  Tensor out({end - begin, m}, std::vector<double>(A.data.begin() + static_cast<std::size_t>(begin) * m,
                                                   A.data.begin() + static_cast<std::size_t>(end) * m));
  int ia = a.id;
  return emit(*a.tape, "slice_rows", std::move(out), {ia}, [ia, begin, m](Tape &tp, const Tensor &g) {
    Tensor ga(tp.value(ia).shape);
    std::copy(g.data.begin(), g.data.end(), ga.data.begin() + static_cast<std::size_t>(begin) * m);
    tp.add_grad(ia, ga);
  });
}

Var reshape(Var a, std::vector<int> shape) {
  Tensor out(shape, a.value().data);
  int ia = a.id;
  return emit(*a.tape, "reshape", std::move(out), {ia}, [ia](Tape &tp, const Tensor &g) {
    tp.add_grad(ia, Tensor(tp.value(ia).shape, g.data));
  });
}

Var silu(Var a) {
  Tensor out = a.value();
  for (double &x : out.data) x = x * sigmoid(x);
  int ia = a.id;
  return emit(*a.tape, "silu", std::move(out), {ia}, [ia](Tape &tp, const Tensor &g) {
    const Tensor &A = tp.value(ia);
    Tensor ga(A.shape);
    for (std::size_t k = 0; k < g.size(); ++k) {
      double s = sigmoid(A.data[k]);
      ga.data[k] = g.data[k] * s * (1.0 + A.data[k] * (1.0 - s));
    }
    tp.add_grad(ia, ga);
  });
}

Var softmax_rows(Var a, const std::vector<bool> &key_mask) {
  const Tensor &A = a.value();
  const int n = A.rows(), m = A.cols();
  require(key_mask.empty() || static_cast<int>(key_mask.size()) == m, "softmax_rows", "mask width");
  Tensor out(A.shape);
  for (int i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (int j = 0; j < m; ++j) {
      if (key_mask.empty() || key_mask[j]) mx = std::max(mx, A.at(i, j));
    }
    std::vector<double> e(m, 0.0);
    for (int j = 0; j < m; ++j) {
      if (key_mask.empty() || key_mask[j]) e[j] = std::exp(A.at(i, j) - mx);
    }
    double z = sorted_sum(e);
    for (int j = 0; j < m; ++j) out.at(i, j) = e[j] / z;
  }
  int ia = a.id;
  Tensor saved = out;
  return emit(*a.tape, "softmax_rows", std::move(out), {ia},
              [ia, saved = std::move(saved), n, m](Tape &tp, const Tensor &g) {
                Tensor ga(saved.shape);
                for (int i = 0; i < n; ++i) {
                  double dot = 0.0;
                  for (int j = 0; j < m; ++j) dot += g.at(i, j) * saved.at(i, j);
                  for (int j = 0; j < m; ++j) ga.at(i, j) = saved.at(i, j) * (g.at(i, j) - dot);
                }
                tp.add_grad(ia, ga);
              });
}

Var normalize_rows(Var a) {
  const Tensor &A = a.value();
  const int n = A.rows(), m = A.cols();
  Tensor out(A.shape);
  std::vector<double> sigma(n);
  for (int i = 0; i < n; ++i) {
    auto [mu, sd] = layer_stats(std::span<const double>(&A.data[static_cast<std::size_t>(i) * m], m));
    sigma[i] = sd;
    for (int j = 0; j < m; ++j) out.at(i, j) = (A.at(i, j) - mu) / sd;
  }
  int ia = a.id;
  Tensor y = out;
  return emit(*a.tape, "normalize_rows", std::move(out), {ia},
              [ia, y = std::move(y), sigma, n, m](Tape &tp, const Tensor &g) {
                Tensor ga(y.shape);
                for (int i = 0; i < n; ++i) {
                  double gm = 0.0, gy = 0.0;
                  for (int j = 0; j < m; ++j) {
                    gm += g.at(i, j);
                    gy += g.at(i, j) * y.at(i, j);
                  }
                  gm /= m;
                  gy /= m;
                  for (int j = 0; j < m; ++j)
                    ga.at(i, j) = (g.at(i, j) - gm - y.at(i, j) * gy) / sigma[i];
                }
                tp.add_grad(ia, ga);
              });
}

Var attend(Var p, Var v) {
  Tape &t = same_tape(p, v);
  const Tensor &P = p.value(), &V = v.value();
  require(P.rank() == 2 && V.rank() == 2 && P.cols() == V.rows(), "attend",
          shape_str(P.shape) + " x " + shape_str(V.shape));
  const int n = P.rows(), k = P.cols(), d = V.cols();
  Tensor out = Tensor::matrix(n, d);
  std::vector<double> terms(k);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) {
      for (int j = 0; j < k; ++j) terms[j] = P.at(i, j) * V.at(j, c);
      out.at(i, c) = sorted_sum(terms);
    }
  }
  int ip = p.id, iv = v.id;
  return emit(t, "attend", std::move(out), {ip, iv}, [ip, iv](Tape &tp, const Tensor &g) {
    const Tensor &P = tp.value(ip), &V = tp.value(iv);
    if (tp.needs_grad(ip)) {
      Tensor gp(P.shape);
      view(gp).noalias() = view(g) * view(V).transpose();
      tp.add_grad(ip, gp);
    }
    if (tp.needs_grad(iv)) {
      Tensor gv(V.shape);
      view(gv).noalias() = view(P).transpose() * view(g);
      tp.add_grad(iv, gv);
    }
  });
}

Var gather_rows(Var table, const std::vector<int> &idx) {
  const Tensor &T = table.value();
  const int m = T.cols();
  Tensor out = Tensor::matrix(static_cast<int>(idx.size()), m);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] >= 0 && idx[r] < T.rows(), "gather_rows", "index out of range");
    for (int c = 0; c < m; ++c) out.at(static_cast<int>(r), c) = T.at(idx[r], c);
  }
  int it = table.id;
  return emit(*table.tape, "gather_rows", std::move(out), {it}, [it, idx, m](Tape &tp, const Tensor &g) {
    Tensor gt(tp.value(it).shape);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (int c = 0; c < m; ++c) gt.at(idx[r], c) += g.at(static_cast<int>(r), c);
    }
    tp.add_grad(it, gt);
  });
}

Var gather_grid(Var table, const std::vector<int> &idx, int n, int col) {
  const Tensor &T = table.value();
  require(static_cast<int>(idx.size()) == n * n && col >= 0 && col < T.cols(), "gather_grid",
          "bad grid");
  Tensor out = Tensor::matrix(n, n);
  for (int k = 0; k < n * n; ++k) {
    require(idx[k] >= 0 && idx[k] < T.rows(), "gather_grid", "index out of range");
    out.data[k] = T.at(idx[k], col);
  }
  int it = table.id;
  return emit(*table.tape, "gather_grid", std::move(out), {it}, [it, idx, n, col](Tape &tp, const Tensor &g) {
    Tensor gt(tp.value(it).shape);
    for (int k = 0; k < n * n; ++k) gt.at(idx[k], col) += g.data[k];
    tp.add_grad(it, gt);
  });
}

Var pair_products(Var a) {
  const Tensor &A = a.value();
  const int n = A.rows(), d = A.cols();
  Tensor out = Tensor::matrix(n * n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c < d; ++c) out.at(i * n + j, c) = A.at(i, c) * A.at(j, c);
    }
  }
  int ia = a.id;
  return emit(*a.tape, "pair_products", std::move(out), {ia}, [ia, n, d](Tape &tp, const Tensor &g) {
    const Tensor &A = tp.value(ia);
    Tensor ga(A.shape);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int c = 0; c < d; ++c) {
          double gij = g.at(i * n + j, c);
          ga.at(i, c) += gij * A.at(j, c);
          ga.at(j, c) += gij * A.at(i, c);
        }
      }
    }
    tp.add_grad(ia, ga);
  });
}

Var sum(Var a) {
  Tensor out({1}, std::accumulate(a.value().data.begin(), a.value().data.end(), 0.0));
  int ia = a.id;
  return emit(*a.tape, "sum", std::move(out), {ia}, [ia](Tape &tp, const Tensor &g) {
    tp.add_grad(ia, Tensor(tp.value(ia).shape, g.data[0]));
  });
}

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) z += out[k] = std::exp(x[k] - mx);
  for (double &v : out) v /= z;
  return out;
}

std::vector<double> log_softmax(std::span<const double> x) {
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  double lz = mx + std::log(z);
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] - lz;
  return out;
}

Var cross_entropy(Var logits, const std::vector<int> &target, const std::vector<double> &weight) {
  const Tensor &L = logits.value();
  const int n = L.rows(), m = L.cols();
  require(static_cast<int>(target.size()) == n && static_cast<int>(weight.size()) == n,
          "cross_entropy", "target/weight length");
  double wsum = 0.0;
  for (double w : weight) wsum += w > 0 ? w : 0.0;
  require(wsum > 0, "cross_entropy", "every position is masked");
  Tensor probs(L.shape);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    if (weight[i] <= 0) continue;
    require(target[i] >= 0 && target[i] < m, "cross_entropy", "target out of range");
    auto lp = log_softmax(std::span<const double>(&L.data[static_cast<std::size_t>(i) * m], m));
    loss -= weight[i] * lp[target[i]];
    for (int j = 0; j < m; ++j) probs.at(i, j) = std::exp(lp[j]);
  }
  loss /= wsum;
  int il = logits.id;
  return emit(*logits.tape, "cross_entropy", Tensor({1}, loss), {il},
              [il, probs = std::move(probs), target, weight, wsum, n, m](Tape &tp, const Tensor &g) {
                Tensor gl(probs.shape);
                for (int i = 0; i < n; ++i) {
                  if (weight[i] <= 0) continue;
                  double s = g.data[0] * weight[i] / wsum;
                  for (int j = 0; j < m; ++j) gl.at(i, j) = s * probs.at(i, j);
                  gl.at(i, target[i]) -= s;
                }
                tp.add_grad(il, gl);
              });
}

void ParamStore::add(const std::string &name, Tensor value) {
  if (index_.count(name)) throw ShapeError("duplicate parameter '" + name + "'");
  index_[name] = states_.size();
  order_.push_back(name);
  Tensor zeros(value.shape, 0.0);
  states_.push_back(ParamState{std::move(value), zeros, zeros});
}

const Tensor &ParamStore::get(const std::string &name) const { return state(name).value; }
Tensor &ParamStore::get_mut(const std::string &name) { return state(name).value; }

ParamState &ParamStore::state(const std::string &name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("unknown parameter '" + name + "'");
  return states_[it->second];
}

const ParamState &ParamStore::state(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("unknown parameter '" + name + "'");
  return states_[it->second];
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto &s : states_) n += s.value.size();
  return n;
}

bool ParamStore::operator==(const ParamStore &o) const {
  if (order_ != o.order_ || step != o.step) return false;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (!(states_[i].value == o.states_[i].value && states_[i].m == o.states_[i].m &&
          states_[i].v == o.states_[i].v))
      return false;
  }
  return true;
}

void opt_step(ParamStore &store, const std::map<std::string, Tensor> &grads, const OptConfig &cfg) {
  for (const auto &[name, g] : grads) {
    if (!store.contains(name)) throw ShapeError("gradient for unknown parameter '" + name + "'");
    if (store.get(name).shape != g.shape) throw ShapeError("gradient shape mismatch for '" + name + "'");
  }
  store.step += 1;
  const double t = static_cast<double>(store.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto &name : store.names()) {
    ParamState &s = store.state(name);
    auto it = grads.find(name);
    const Tensor *g = it == grads.end() ? nullptr : &it->second;
    for (std::size_t k = 0; k < s.value.size(); ++k) {
      double gk = g ? g->data[k] : 0.0;
      if (cfg.kind == OptKind::kSgd) {
        s.value.data[k] -= cfg.lr * gk;
        continue;
      }
      s.m.data[k] = cfg.beta1 * s.m.data[k] + (1.0 - cfg.beta1) * gk;
      s.v.data[k] = cfg.beta2 * s.v.data[k] + (1.0 - cfg.beta2) * gk * gk;
      double mhat = s.m.data[k] / bc1;
      double vhat = s.v.data[k] / bc2;
      s.value.data[k] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * s.value.data[k]);
    }
  }
}

Tensor uniform_tensor(std::vector<int> shape, double bound, Rng &rng) {
  Tensor t(std::move(shape));
  for (double &x : t.data) x = (2.0 * rng.uniform() - 1.0) * bound;
  return t;
}

namespace {

double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

}  // namespace

double grad_check(const LossFn &f, const std::vector<Tensor> &inputs, double eps) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto &x : inputs) vars.push_back(tape.leaf(x));
  tape.backward(f(tape, vars));
  std::vector<Tensor> analytic;
  for (Var v : vars) {
    const Tensor &g = tape.grad(v);
    analytic.push_back(g.data.empty() ? Tensor(v.value().shape, 0.0) : g);
  }
  auto eval = [&](const std::vector<Tensor> &xs) {
    Tape t;
    std::vector<Var> vs;
    for (const auto &x : xs) vs.push_back(t.leaf(x));
    return f(t, vs).value().data[0];
  };
  double worst = 0.0;
  std::vector<Tensor> xs = inputs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t k = 0; k < xs[i].size(); ++k) {
      double orig = xs[i].data[k];
      xs[i].data[k] = orig + eps;
      double up = eval(xs);
      xs[i].data[k] = orig - eps;
      double dn = eval(xs);
      xs[i].data[k] = orig;
      worst = std::max(worst, rel_err(analytic[i].data[k], (up - dn) / (2 * eps)));
    }
  }
  return worst;
}

double grad_check_params(const std::function<Var(Tape &, const ParamStore &)> &f, ParamStore &store,
                         double eps, int per_tensor) {
  Tape tape;
  tape.backward(f(tape, store));
  auto grads = tape.param_grads();
  double worst = 0.0;
  for (const auto &name : store.names()) {
    Tensor &p = store.get_mut(name);
    const std::size_t n = p.size();
    std::size_t stride = 1;
    if (per_tensor > 0 && n > static_cast<std::size_t>(per_tensor)) stride = n / per_tensor;
    for (std::size_t k = 0; k < n; k += stride) {
      double analytic = grads.count(name) ? grads[name].data[k] : 0.0;
      double orig = p.data[k];
      p.data[k] = orig + eps;
      Tape t1;
      double up = f(t1, store).value().data[0];
      p.data[k] = orig - eps;
      Tape t2;
      double dn = f(t2, store).value().data[0];
      p.data[k] = orig;
      worst = std::max(worst, rel_err(analytic, (up - dn) / (2 * eps)));
    }
  }
  return worst;
}

}  // namespace graphdiff
