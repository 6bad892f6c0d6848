#pragma once

// Dense/sparse kernels, a reverse-mode tape over matrix-valued nodes, and
// Adam. Everything is double precision and single-threaded per tape.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stgraph/error.hpp"
#include "stgraph/graph.hpp"
#include "stgraph/random.hpp"

namespace stgraph {

class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw ShapeError("matrix data length does not match rows x cols");
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_str(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

inline Matrix from_graph_features(const Graph& g) { return Matrix(g.num_nodes, g.feature_dim, g.features); }

// Compressed sparse rows.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return val.size(); }

  double at(std::size_t i, std::size_t j) const {
    for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      if (col[k] == j) return val[k];
    return 0.0;
  }
};

namespace detail {
// Sorted neighbour lists of the symmetrised edge set.
inline std::vector<std::vector<std::uint32_t>> adjacency_lists(std::span<const Edge> edges, std::size_t n) {
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) throw DataError("edge endpoint out of range");
    if (e.src == e.dst) throw DataError("self-loop in input edge list");
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return adj;
}
}  // namespace detail

// D^{-1/2} (A + I) D^{-1/2}, with D the degree matrix of A + I.
inline SparseMatrix normalize_adjacency(std::span<const Edge> edges, std::size_t n) {
  auto adj = detail::adjacency_lists(edges, n);
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(adj[i].size() + 1));
  SparseMatrix s;
  s.rows = s.cols = n;
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = adj[i];
    a.insert(std::lower_bound(a.begin(), a.end(), static_cast<std::uint32_t>(i)), static_cast<std::uint32_t>(i));
    for (auto j : a) {
      s.col.push_back(j);
      s.val.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    s.row_ptr.push_back(s.col.size());
  }
  return s;
}

// Row i averages the open neighbourhood of i; isolated rows are empty.
inline SparseMatrix mean_neighbors(std::span<const Edge> edges, std::size_t n) {
  const auto adj = detail::adjacency_lists(edges, n);
  SparseMatrix s;
  s.rows = s.cols = n;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = adj[i].empty() ? 0.0 : 1.0 / static_cast<double>(adj[i].size());
    for (auto j : adj[i]) {
      s.col.push_back(j);
      s.val.push_back(w);
    }
    s.row_ptr.push_back(s.col.size());
  }
  return s;
}

// Closed neighbourhoods (self included), CSR with unit weights.
inline SparseMatrix closed_neighborhoods(std::span<const Edge> edges, std::size_t n) {
  auto adj = detail::adjacency_lists(edges, n);
  SparseMatrix s;
  s.rows = s.cols = n;
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = adj[i];
    a.insert(std::lower_bound(a.begin(), a.end(), static_cast<std::uint32_t>(i)), static_cast<std::uint32_t>(i));
    for (auto j : a) {
      s.col.push_back(j);
      s.val.push_back(1.0);
    }
    s.row_ptr.push_back(s.col.size());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Kernels

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape_str(a) + " times " + shape_str(b));
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const auto bk = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// a^T b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: " + shape_str(a) + " vs " + shape_str(b));
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto ak = a.row(k);
    const auto bk = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      auto ci = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

// a b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: " + shape_str(a) + " vs " + shape_str(b));
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

inline Matrix spmm(const SparseMatrix& s, const Matrix& h) {
  if (s.cols != h.rows()) throw ShapeError("spmm: sparse " + std::to_string(s.rows) + "x" + std::to_string(s.cols) +
                                           " times " + shape_str(h));
  Matrix out(s.rows, h.cols());
  for (std::size_t i = 0; i < s.rows; ++i) {
    auto oi = out.row(i);
    for (auto k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) {
      const double w = s.val[k];
      const auto hj = h.row(s.col[k]);
      for (std::size_t c = 0; c < h.cols(); ++c) oi[c] += w * hj[c];
    }
  }
  return out;
}

// s^T g
inline Matrix spmm_transposed(const SparseMatrix& s, const Matrix& g) {
  if (s.rows != g.rows()) throw ShapeError("spmm_transposed: shape mismatch");
  Matrix out(s.cols, g.cols());
  for (std::size_t i = 0; i < s.rows; ++i) {
    const auto gi = g.row(i);
    for (auto k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) {
      const double w = s.val[k];
      auto oj = out.row(s.col[k]);
      for (std::size_t c = 0; c < g.cols(); ++c) oj[c] += w * gi[c];
    }
  }
  return out;
}

inline Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

// Keep-mask scaled by 1/(1 - rate); survivors are drawn independently.
inline std::vector<double> dropout_mask(std::size_t n, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  std::vector<double> mask(n);
  Rng rng(seed);
  const double scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : scale;
  return mask;
}

inline Matrix dropout(const Matrix& x, double rate, std::uint64_t seed, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const auto mask = dropout_mask(x.size(), rate, seed);
  Matrix y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] *= mask[i];
  return y;
}

// Cross-correlates every row with a shared odd-length kernel, zero padded,
// output length equal to input length.
inline Matrix conv1d_same(const Matrix& x, std::span<const double> kernel) {
  if (kernel.empty() || kernel.size() % 2 == 0) throw ShapeError("conv1d_same: kernel length must be odd");
  const auto half = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  const auto cols = static_cast<std::ptrdiff_t>(x.cols());
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    auto yi = y.row(i);
    for (std::ptrdiff_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(kernel.size()); ++t) {
        const auto src = c + t - half;
        if (src >= 0 && src < cols) s += kernel[static_cast<std::size_t>(t)] * xi[static_cast<std::size_t>(src)];
      }
      yi[static_cast<std::size_t>(c)] = s;
    }
  }
  return y;
}

// Row-wise max-shifted softmax.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) sum += (p(i, c) = std::exp(z[c] - mx));
    for (std::size_t c = 0; c < z.size(); ++c) p(i, c) /= sum;
  }
  return p;
}

struct XentResult {
  double loss = 0.0;
  Matrix probabilities;
};

// Mean negative log-likelihood over rows where mask is set.
inline XentResult softmax_xent(const Matrix& logits, std::span<const int> labels, std::span<const std::uint8_t> mask) {
  if (logits.cols() != 2) throw ShapeError("softmax_xent expects N x 2 logits, got " + shape_str(logits));
  if (labels.size() != logits.rows() || mask.size() != logits.rows())
    throw ShapeError("softmax_xent: labels/mask length does not match logits rows");
  XentResult r{0.0, softmax_rows(logits)};
  std::size_t count = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    const int y = labels[i];
    if (y != 0 && y != 1) throw DataError("softmax_xent: label outside {0, 1}");
    const auto z = logits.row(i);
    const double mx = std::max(z[0], z[1]);
    const double lse = mx + std::log(std::exp(z[0] - mx) + std::exp(z[1] - mx));
    r.loss += lse - z[static_cast<std::size_t>(y)];
    ++count;
  }
  if (count == 0) throw DataError("softmax_xent: empty mask");
  r.loss /= static_cast<double>(count);
  return r;
}

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

inline constexpr double kGatSlope = 0.2;

// Attention coefficients aligned with the CSR entries of `nbhd`:
// alpha_ij = softmax_j leaky_relu(a_self . wh_i + a_nbr . wh_j).
inline std::vector<double> gat_attention(const Matrix& wh, const Matrix& a_self, const Matrix& a_nbr,
                                         const SparseMatrix& nbhd) {
  if (a_self.rows() != wh.cols() || a_nbr.rows() != wh.cols() || a_self.cols() != 1 || a_nbr.cols() != 1)
    throw ShapeError("gat: attention vectors must be " + std::to_string(wh.cols()) + "x1");
  if (nbhd.rows != wh.rows()) throw ShapeError("gat: neighbourhood size mismatch");
  const Matrix s = matmul(wh, a_self), t = matmul(wh, a_nbr);
  std::vector<double> alpha(nbhd.nnz());
  for (std::size_t i = 0; i < nbhd.rows; ++i) {
    const auto b = nbhd.row_ptr[i], e = nbhd.row_ptr[i + 1];
    if (b == e) continue;
    double mx = -INFINITY;
    for (auto k = b; k < e; ++k) mx = std::max(mx, alpha[k] = leaky_relu(s(i, 0) + t(nbhd.col[k], 0), kGatSlope));
    double sum = 0.0;
    for (auto k = b; k < e; ++k) sum += (alpha[k] = std::exp(alpha[k] - mx));
    for (auto k = b; k < e; ++k) alpha[k] /= sum;
  }
  return alpha;
}

// ---------------------------------------------------------------------------
// Tape

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Tape {
public:
  using BackwardFn = std::function<void(Tape&)>;

  Var leaf(Matrix value, bool requires_grad = false) { return push(std::move(value), requires_grad, nullptr); }

  const Matrix& value(Var v) const { return node(v).value; }

  // Gradient of the last backward() root; zeros if the node was unreached.
  const Matrix& grad(Var v) {
    auto& n = node(v);
    ensure_grad(n);
    return n.grad;
  }

  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Records an op. `backward` runs only if some input requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
    bool rg = false;
    for (auto in : inputs) rg = rg || node(in).requires_grad;
    return push(std::move(value), rg, rg ? std::move(backward) : nullptr);
  }

  // Accumulates into the gradient of `v` (skipped for constants).
  Matrix* grad_sink(Var v) {
    auto& n = node(v);
    if (!n.requires_grad) return nullptr;
    ensure_grad(n);
    return &n.grad;
  }

  const Matrix& upstream(Var v) {
    auto& n = node(v);
    ensure_grad(n);
    return n.grad;
  }

  void backward(Var root) {
    if (nodes_.empty() || root.id >= nodes_.size()) throw NumericError("backward called before any forward pass");
    if (done_) throw NumericError("backward already ran on this tape");
    auto& r = nodes_[root.id];
    if (r.value.rows() != 1 || r.value.cols() != 1) throw ShapeError("backward root must be a 1x1 scalar");
    done_ = true;
    ensure_grad(r);
    r.grad(0, 0) = 1.0;
    for (std::size_t k = root.id + 1; k-- > 0;) {
      if (nodes_[k].backward && nodes_[k].has_grad) nodes_[k].backward(*this);
    }
  }

private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Var push(Matrix value, bool rg, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), {}, rg, false, std::move(fn)});
    return Var{nodes_.size() - 1};
  }

  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw NumericError("variable does not belong to this tape");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw NumericError("variable does not belong to this tape");
    return nodes_[v.id];
  }

  static void ensure_grad(Node& n) {
    if (!n.has_grad) {
      n.grad = Matrix(n.value.rows(), n.value.cols());
      n.has_grad = true;
    }
  }

  std::vector<Node> nodes_;
  bool done_ = false;
};

namespace ad {

inline void accumulate(Matrix* sink, const Matrix& g) {
  if (!sink) return;
  auto& d = sink->data();
  const auto& s = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

inline Var matmul(Tape& t, Var a, Var b) {
  Matrix out = stgraph::matmul(t.value(a), t.value(b));
  return t.record(std::move(out), {a, b}, [a, b, self = Var{t.size()}](Tape& tp) {
    const Matrix& g = tp.upstream(self);
    if (auto* ga = tp.grad_sink(a)) accumulate(ga, matmul_nt(g, tp.value(b)));
    if (auto* gb = tp.grad_sink(b)) accumulate(gb, matmul_tn(tp.value(a), g));
  });
}

// `s` must outlive the tape.
inline Var spmm(Tape& t, const SparseMatrix& s, Var h) {
  Matrix out = stgraph::spmm(s, t.value(h));
  return t.record(std::move(out), {h}, [&s, h, self = Var{t.size()}](Tape& tp) {
    accumulate(tp.grad_sink(h), spmm_transposed(s, tp.upstream(self)));
  });
}

inline Var add(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (!av.same_shape(bv)) throw ShapeError("add: " + shape_str(av) + " vs " + shape_str(bv));
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += bv.data()[i];
  return t.record(std::move(out), {a, b}, [a, b, self = Var{t.size()}](Tape& tp) {
    const Matrix& g = tp.upstream(self);
    accumulate(tp.grad_sink(a), g);
    accumulate(tp.grad_sink(b), g);
  });
}

// x (N x C) plus a 1 x C bias broadcast over rows.
inline Var add_row(Tape& t, Var x, Var bias) {
  const Matrix& xv = t.value(x);
  const Matrix& bv = t.value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) throw ShapeError("add_row: bias must be 1x" + std::to_string(xv.cols()));
  Matrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv(0, j);
  return t.record(std::move(out), {x, bias}, [x, bias, self = Var{t.size()}](Tape& tp) {
    const Matrix& g = tp.upstream(self);
    accumulate(tp.grad_sink(x), g);
    if (auto* gb = tp.grad_sink(bias))
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*gb)(0, j) += g(i, j);
  });
}

inline Var relu(Tape& t, Var x) {
  Matrix out = stgraph::relu(t.value(x));
  return t.record(std::move(out), {x}, [x, self = Var{t.size()}](Tape& tp) {
    const Matrix& g = tp.upstream(self);
    const Matrix& xv = tp.value(x);
    Matrix gx(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) gx.data()[i] = xv.data()[i] > 0.0 ? g.data()[i] : 0.0;
    accumulate(tp.grad_sink(x), gx);
  });
}

inline Var dropout(Tape& t, Var x, double rate, std::uint64_t seed, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  auto mask = dropout_mask(t.value(x).size(), rate, seed);
  Matrix out = t.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask[i];
  return t.record(std::move(out), {x}, [x, mask = std::move(mask), self = Var{t.size()}](Tape& tp) {
    Matrix gx = tp.upstream(self);
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] *= mask[i];
    accumulate(tp.grad_sink(x), gx);
  });
}

// kernel: 1 x k row vector.
inline Var conv1d_same(Tape& t, Var x, Var kernel) {
  const Matrix& kv = t.value(kernel);
  if (kv.rows() != 1) throw ShapeError("conv1d_same: kernel must be a 1 x k row");
  Matrix out = stgraph::conv1d_same(t.value(x), kv.row(0));
  return t.record(std::move(out), {x, kernel}, [x, kernel, self = Var{t.size()}](Tape& tp) {
    const Matrix& g = tp.upstream(self);
    const Matrix& xv = tp.value(x);
    const auto w = tp.value(kernel).row(0);
    const auto k = static_cast<std::ptrdiff_t>(w.size());
    const auto half = k / 2;
    const auto cols = static_cast<std::ptrdiff_t>(xv.cols());
    Matrix* gx = tp.grad_sink(x);
    Matrix* gw = tp.grad_sink(kernel);
    for (std::size_t i = 0; i < xv.rows(); ++i) {
      for (std::ptrdiff_t c = 0; c < cols; ++c) {
        const double gic = g(i, static_cast<std::size_t>(c));
        if (gic == 0.0) continue;
        for (std::ptrdiff_t tt = 0; tt < k; ++tt) {
          const auto src = c + tt - half;
          if (src < 0 || src >= cols) continue;
          if (gx) (*gx)(i, static_cast<std::size_t>(src)) += w[static_cast<std::size_t>(tt)] * gic;
          if (gw) (*gw)(0, static_cast<std::size_t>(tt)) += xv(i, static_cast<std::size_t>(src)) * gic;
        }
      }
    }
  });
}

// Single-head attention aggregation over closed neighbourhoods (before the
// output nonlinearity).
inline Var gat_aggregate(Tape& t, Var wh, Var a_self, Var a_nbr, const SparseMatrix& nbhd) {
  const Matrix& whv = t.value(wh);
  auto alpha = gat_attention(whv, t.value(a_self), t.value(a_nbr), nbhd);
  Matrix out(whv.rows(), whv.cols());
  for (std::size_t i = 0; i < nbhd.rows; ++i) {
    auto oi = out.row(i);
    for (auto k = nbhd.row_ptr[i]; k < nbhd.row_ptr[i + 1]; ++k) {
      const auto hj = whv.row(nbhd.col[k]);
      for (std::size_t c = 0; c < whv.cols(); ++c) oi[c] += alpha[k] * hj[c];
    }
  }
  return t.record(std::move(out), {wh, a_self, a_nbr},
                  [wh, a_self, a_nbr, &nbhd, alpha = std::move(alpha), self = Var{t.size()}](Tape& tp) {
    const Matrix& g = tp.upstream(self);
    const Matrix& h = tp.value(wh);
    const Matrix& as = tp.value(a_self);
    const Matrix& an = tp.value(a_nbr);
    const std::size_t n = h.rows(), d = h.cols();
    const Matrix s = stgraph::matmul(h, as), tv = stgraph::matmul(h, an);
    Matrix gh(n, d);
    std::vector<double> ds(n, 0.0), dt(n, 0.0);
    std::vector<double> dalpha;
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = nbhd.row_ptr[i], e = nbhd.row_ptr[i + 1];
      const auto gi = g.row(i);
      dalpha.assign(e - b, 0.0);
      double weighted = 0.0;
      for (auto k = b; k < e; ++k) {
        const auto j = nbhd.col[k];
        const auto hj = h.row(j);
        auto ghj = gh.row(j);
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          ghj[c] += alpha[k] * gi[c];
          dot += gi[c] * hj[c];
        }
        dalpha[k - b] = dot;
        weighted += alpha[k] * dot;
      }
      for (auto k = b; k < e; ++k) {
        const auto j = nbhd.col[k];
        const double de = alpha[k] * (dalpha[k - b] - weighted);
        const double z = s(i, 0) + tv(j, 0);
        const double dz = de * (z > 0.0 ? 1.0 : kGatSlope);
        ds[i] += dz;
        dt[j] += dz;
      }
    }
    Matrix gas(d, 1), gan(d, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto hi = h.row(i);
      auto ghi = gh.row(i);
      for (std::size_t c = 0; c < d; ++c) {
        ghi[c] += ds[i] * as(c, 0) + dt[i] * an(c, 0);
        gas(c, 0) += ds[i] * hi[c];
        gan(c, 0) += dt[i] * hi[c];
      }
    }
    accumulate(tp.grad_sink(wh), gh);
    accumulate(tp.grad_sink(a_self), gas);
    accumulate(tp.grad_sink(a_nbr), gan);
  });
}

inline Var sum(Tape& t, Var x) {
  double s = 0.0;
  for (double v : t.value(x).data()) s += v;
  return t.record(Matrix(1, 1, s), {x}, [x, self = Var{t.size()}](Tape& tp) {
    const double g = tp.upstream(self)(0, 0);
    if (auto* gx = tp.grad_sink(x))
      for (double& v : gx->data()) v += g;
  });
}

// Scalar masked mean cross-entropy. Labels/mask must outlive backward().
inline Var softmax_xent(Tape& t, Var logits, std::span<const int> labels, std::span<const std::uint8_t> mask) {
  auto r = stgraph::softmax_xent(t.value(logits), labels, mask);
  std::size_t count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  return t.record(Matrix(1, 1, r.loss), {logits},
                  [logits, labels, mask, p = std::move(r.probabilities), count, self = Var{t.size()}](Tape& tp) {
    const double g = tp.upstream(self)(0, 0) / static_cast<double>(count);
    Matrix gz(p.rows(), p.cols());
    for (std::size_t i = 0; i < p.rows(); ++i) {
      if (!mask[i]) continue;
      for (std::size_t c = 0; c < 2; ++c)
        gz(i, c) = g * (p(i, c) - (static_cast<int>(c) == labels[i] ? 1.0 : 0.0));
    }
    accumulate(tp.grad_sink(logits), gz);
  });
}

}  // namespace ad

// ---------------------------------------------------------------------------
// Adam with coupled L2 (weight decay folded into the gradient).

struct AdamState {
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;
};

inline void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads, AdamState& state, double lr,
                      double weight_decay) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.rows(), p.cols());
      state.v.emplace_back(p.rows(), p.cols());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state does not match parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(AdamState::beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(AdamState::beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k].data();
    const auto& g = grads[k].data();
    auto& m = state.m[k].data();
    auto& v = state.v[k].data();
    if (g.size() != p.size() || m.size() != p.size()) throw ShapeError("adam: shape mismatch at parameter " + std::to_string(k));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + weight_decay * p[i];
      m[i] = AdamState::beta1 * m[i] + (1.0 - AdamState::beta1) * gi;
      v[i] = AdamState::beta2 * v[i] + (1.0 - AdamState::beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + AdamState::eps);
    }
  }
}

}  // namespace stgraph
