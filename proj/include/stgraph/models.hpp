#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stgraph/autodiff.hpp"
#include "stgraph/error.hpp"
#include "stgraph/graph.hpp"
#include "stgraph/random.hpp"

namespace stgraph {

enum class Arch { gcn, gat, sage, dstgcn };

inline constexpr Arch kAllArchs[] = {Arch::gcn, Arch::gat, Arch::sage, Arch::dstgcn};

inline std::string to_string(Arch a) {
  switch (a) {
    case Arch::gcn: return "gcn";
    case Arch::gat: return "gat";
    case Arch::sage: return "sage";
    case Arch::dstgcn: return "dstgcn";
  }
  return "?";
}

inline Arch parse_arch(std::string_view s) {
  for (auto a : kAllArchs)
    if (to_string(a) == s) return a;
  throw ConfigError("unknown architecture '" + std::string(s) + "' (expected gcn|gat|sage|dstgcn)");
}

struct ModelConfig {
  Arch arch = Arch::dstgcn;
  std::size_t hidden_dim = 32;
  std::size_t num_blocks = 2;
  double dropout = 0.30;
  std::size_t temporal_kernel = 3;  // dstgcn only

  bool operator==(const ModelConfig&) const = default;

  void validate() const {
    if (hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
    if (num_blocks == 0) throw ConfigError("num_blocks must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (temporal_kernel == 0 || temporal_kernel % 2 == 0) throw ConfigError("temporal_kernel must be odd and positive");
  }
};

struct NamedParam {
  std::string name;
  Matrix value;
  bool operator==(const NamedParam&) const = default;
};

struct ModelParams {
  std::size_t input_dim = 0;
  std::vector<NamedParam> entries;

  const Matrix& at(std::string_view name) const {
    for (const auto& p : entries)
      if (p.name == name) return p.value;
    throw ShapeError("model has no parameter '" + std::string(name) + "'");
  }
  Matrix& at(std::string_view name) { return const_cast<Matrix&>(std::as_const(*this).at(name)); }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : entries) n += p.value.size();
    return n;
  }

  bool operator==(const ModelParams&) const = default;
};

namespace detail {
inline std::string block_name(std::size_t l, std::string_view what) {
  return "block" + std::to_string(l) + "." + std::string(what);
}
}  // namespace detail

// Parameter names and shapes, in initialisation order.
inline std::vector<NamedParam> parameter_layout(const ModelConfig& cfg, std::size_t input_dim) {
  std::vector<NamedParam> out;
  const std::size_t h = cfg.hidden_dim;
  for (std::size_t l = 0; l < cfg.num_blocks; ++l) {
    const std::size_t in = l == 0 ? input_dim : h;
    switch (cfg.arch) {
      case Arch::gcn:
        out.push_back({detail::block_name(l, "weight"), Matrix(in, h)});
        break;
      case Arch::dstgcn:
        out.push_back({detail::block_name(l, "spatial"), Matrix(in, h)});
        out.push_back({detail::block_name(l, "temporal"), Matrix(1, cfg.temporal_kernel)});
        break;
      case Arch::gat:
        out.push_back({detail::block_name(l, "weight"), Matrix(in, h)});
        out.push_back({detail::block_name(l, "att_self"), Matrix(h, 1)});
        out.push_back({detail::block_name(l, "att_nbr"), Matrix(h, 1)});
        break;
      case Arch::sage:
        out.push_back({detail::block_name(l, "self"), Matrix(in, h)});
        out.push_back({detail::block_name(l, "neigh"), Matrix(in, h)});
        break;
    }
  }
  out.push_back({"head.weight", Matrix(h, 2)});
  out.push_back({"head.bias", Matrix(1, 2)});
  return out;
}

// Glorot-uniform weights, zero biases. A 1 x k temporal kernel counts k as
// both fan-in and fan-out.
inline ModelParams init_params(const ModelConfig& cfg, std::size_t input_dim, std::uint64_t seed) {
  cfg.validate();
  if (input_dim == 0) throw ConfigError("input dimension must be positive");
  ModelParams p{input_dim, parameter_layout(cfg, input_dim)};
  Rng rng(seed);
  for (auto& np : p.entries) {
    if (np.name == "head.bias") continue;
    double fan_in = static_cast<double>(np.value.rows()), fan_out = static_cast<double>(np.value.cols());
    if (np.value.rows() == 1) fan_in = fan_out;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : np.value.data()) v = rng.uniform(-bound, bound);
  }
  return p;
}

// Sparse operators derived from a graph's edge list.
struct GraphContext {
  std::size_t num_nodes = 0;
  SparseMatrix norm_adj;   // D^-1/2 (A + I) D^-1/2
  SparseMatrix mean_adj;   // open-neighbourhood mean
  SparseMatrix closed_nb;  // closed neighbourhoods for attention

  GraphContext() = default;
  GraphContext(std::span<const Edge> edges, std::size_t n)
      : num_nodes(n),
        norm_adj(normalize_adjacency(edges, n)),
        mean_adj(mean_neighbors(edges, n)),
        closed_nb(closed_neighborhoods(edges, n)) {}
  explicit GraphContext(const Graph& g) : GraphContext(g.edges, g.num_nodes) {}
};

// Parameters bound to tape leaves.
class BoundParams {
public:
  BoundParams(Tape& tape, const ModelParams& params, bool requires_grad = true) {
    for (const auto& p : params.entries) {
      names_.push_back(p.name);
      vars_.push_back(tape.leaf(p.value, requires_grad));
    }
  }
  Var operator[](std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return vars_[i];
    throw ShapeError("model has no parameter '" + std::string(name) + "'");
  }
  const std::vector<Var>& vars() const { return vars_; }

private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
};

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

namespace detail {

inline void check_input(const Tape& t, Var x, const GraphContext& ctx, const ModelParams& p) {
  const Matrix& xv = t.value(x);
  if (xv.rows() != ctx.num_nodes) throw ShapeError("feature rows do not match graph node count");
  if (xv.cols() != p.input_dim)
    throw ShapeError("feature dimension " + std::to_string(xv.cols()) + " does not match model input dimension " +
                     std::to_string(p.input_dim));
}

inline Var between_blocks(Tape& t, Var h, const ModelConfig& cfg, std::size_t l, const ForwardOptions& opt) {
  if (l + 1 == cfg.num_blocks) return h;
  return ad::dropout(t, h, cfg.dropout, mix_seed(opt.dropout_seed, l), opt.training);
}

inline Var head(Tape& t, Var h, const BoundParams& bp) {
  return ad::add_row(t, ad::matmul(t, h, bp["head.weight"]), bp["head.bias"]);
}

}  // namespace detail

inline Var gcn_forward(Tape& t, Var x, const GraphContext& ctx, const ModelConfig& cfg, const BoundParams& bp,
                       const ForwardOptions& opt) {
  Var h = x;
  for (std::size_t l = 0; l < cfg.num_blocks; ++l) {
    h = ad::relu(t, ad::matmul(t, ad::spmm(t, ctx.norm_adj, h), bp[detail::block_name(l, "weight")]));
    h = detail::between_blocks(t, h, cfg, l, opt);
  }
  return detail::head(t, h, bp);
}

inline Var dstgcn_forward(Tape& t, Var x, const GraphContext& ctx, const ModelConfig& cfg, const BoundParams& bp,
                          const ForwardOptions& opt) {
  Var h = x;
  for (std::size_t l = 0; l < cfg.num_blocks; ++l) {
    Var spatial = ad::relu(t, ad::matmul(t, ad::spmm(t, ctx.norm_adj, h), bp[detail::block_name(l, "spatial")]));
    h = ad::relu(t, ad::conv1d_same(t, spatial, bp[detail::block_name(l, "temporal")]));
    h = detail::between_blocks(t, h, cfg, l, opt);
  }
  return detail::head(t, h, bp);
}

inline Var gat_forward(Tape& t, Var x, const GraphContext& ctx, const ModelConfig& cfg, const BoundParams& bp,
                       const ForwardOptions& opt) {
  Var h = x;
  for (std::size_t l = 0; l < cfg.num_blocks; ++l) {
    Var wh = ad::matmul(t, h, bp[detail::block_name(l, "weight")]);
    h = ad::relu(t, ad::gat_aggregate(t, wh, bp[detail::block_name(l, "att_self")],
                                      bp[detail::block_name(l, "att_nbr")], ctx.closed_nb));
    h = detail::between_blocks(t, h, cfg, l, opt);
  }
  return detail::head(t, h, bp);
}

inline Var sage_forward(Tape& t, Var x, const GraphContext& ctx, const ModelConfig& cfg, const BoundParams& bp,
                        const ForwardOptions& opt) {
  Var h = x;
  for (std::size_t l = 0; l < cfg.num_blocks; ++l) {
    Var self = ad::matmul(t, h, bp[detail::block_name(l, "self")]);
    Var neigh = ad::matmul(t, ad::spmm(t, ctx.mean_adj, h), bp[detail::block_name(l, "neigh")]);
    h = ad::relu(t, ad::add(t, self, neigh));
    h = detail::between_blocks(t, h, cfg, l, opt);
  }
  return detail::head(t, h, bp);
}

inline Var forward(Tape& t, Var x, const GraphContext& ctx, const ModelConfig& cfg, const ModelParams& params,
                   const BoundParams& bp, const ForwardOptions& opt) {
  detail::check_input(t, x, ctx, params);
  switch (cfg.arch) {
    case Arch::gcn: return gcn_forward(t, x, ctx, cfg, bp, opt);
    case Arch::gat: return gat_forward(t, x, ctx, cfg, bp, opt);
    case Arch::sage: return sage_forward(t, x, ctx, cfg, bp, opt);
    case Arch::dstgcn: return dstgcn_forward(t, x, ctx, cfg, bp, opt);
  }
  throw ConfigError("unknown architecture");
}

// Evaluation-mode logits without gradient bookkeeping.
inline Matrix infer_logits(const Matrix& features, const GraphContext& ctx, const ModelConfig& cfg,
                           const ModelParams& params) {
  Tape t;
  BoundParams bp(t, params, false);
  Var x = t.leaf(features);
  return t.value(forward(t, x, ctx, cfg, params, bp, {}));
}

struct Prediction {
  Matrix probabilities;
  std::vector<int> labels;
};

// Row softmax and argmax; ties resolve to class 0.
inline Prediction predict(const Matrix& logits) {
  if (logits.cols() != 2) throw ShapeError("predict expects N x 2 logits, got " + shape_str(logits));
  Prediction p{softmax_rows(logits), {}};
  p.labels.reserve(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) p.labels.push_back(logits(i, 1) > logits(i, 0) ? 1 : 0);
  return p;
}

}  // namespace stgraph

namespace stgraph {

inline std::size_t parameter_count(const ModelConfig& cfg, std::size_t input_dim) {
  std::size_t n = 0;
  for (const auto& p : parameter_layout(cfg, input_dim)) n += p.value.size();
  return n;
}

}  // namespace stgraph
