#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the code path it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <utility>
#include <vector>

#include "stgraph/stgraph.hpp"

namespace oracle {

using stgraph::Matrix;

inline Matrix dense_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

// Dense D^-1/2 (A + I) D^-1/2 straight from the definition.
inline Matrix dense_normalized_adjacency(const std::vector<stgraph::Edge>& edges, std::size_t n) {
  Matrix a(n, n);
  for (const auto& e : edges) a(e.src, e.dst) = a(e.dst, e.src) = 1.0;
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i] += a(i, j);
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, j) / std::sqrt(d[i] * d[j]);
  return out;
}

inline Matrix densify(const stgraph::SparseMatrix& s) {
  Matrix m(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (auto k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) m(i, s.col[k]) += s.val[k];
  return m;
}

// Exhaustive pair check of both fine-graph rules; returns sorted directed edges.
inline std::vector<stgraph::Edge> fine_edges_bruteforce(const std::vector<stgraph::CrashRecord>& r, double dist_km,
                                                        double window_h) {
  std::vector<stgraph::Edge> out;
  for (std::uint32_t i = 0; i < r.size(); ++i)
    for (std::uint32_t j = 0; j < r.size(); ++j) {
      if (i == j) continue;
      const double hours = std::abs(static_cast<double>(r[j].timestamp - r[i].timestamp)) / 3600.0;
      const double km = stgraph::haversine_km({r[i].latitude, r[i].longitude}, {r[j].latitude, r[j].longitude});
      if (hours <= window_h && km <= dist_km) out.push_back({i, j});
    }
  std::sort(out.begin(), out.end());
  return out;
}

// Mann-Whitney U / (pos * neg), ties counted one half.
inline double auc_pair_counting(const std::vector<int>& y, const std::vector<double>& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  return wins / pairs;
}

// Step-formula AP re-evaluated by counting from scratch at each distinct threshold.
inline double ap_bruteforce(const std::vector<int>& y, const std::vector<double>& s) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double positives = 0.0;
  for (int v : y) positives += v;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, predicted = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (s[i] >= t) {
        predicted += 1.0;
        tp += y[i];
      }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

// Symmetric random graph without self-loops, as a sorted directed edge list.
inline std::vector<stgraph::Edge> random_edges(std::size_t n, double p, stgraph::Rng& rng) {
  std::vector<stgraph::Edge> e;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) {
        e.push_back({i, j});
        e.push_back({j, i});
      }
  std::sort(e.begin(), e.end());
  return e;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, stgraph::Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(-scale, scale);
  return m;
}

// Synthetic graph with the given feature dimension; masks cover all nodes.
inline stgraph::Graph random_graph(std::size_t n, std::size_t f, double p, stgraph::Rng& rng,
                                   stgraph::GraphMode mode = stgraph::GraphMode::fine) {
  stgraph::Graph g;
  g.meta.mode = mode;
  g.num_nodes = n;
  g.feature_dim = f;
  g.features = random_matrix(n, f, rng).data();
  g.edges = random_edges(n, p, rng);
  for (std::size_t i = 0; i < n; ++i) g.labels.push_back(static_cast<int>(rng.below(2)));
  return g;
}

// Node permutation: new index of old node i is perm[i].
inline Matrix permute_rows(const Matrix& m, const std::vector<std::uint32_t>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t c = 0; c < m.cols(); ++c) out(perm[i], c) = m(i, c);
  return out;
}

inline std::vector<stgraph::Edge> permute_edges(const std::vector<stgraph::Edge>& e,
                                                const std::vector<std::uint32_t>& perm) {
  std::vector<stgraph::Edge> out;
  for (const auto& x : e) out.push_back({perm[x.src], perm[x.dst]});
  std::sort(out.begin(), out.end());
  return out;
}

// Max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, floor),
// numeric by central differences.
inline double max_relative_gradient_error(Matrix& param, const Matrix& analytic,
                                          const std::function<double()>& loss, double step = 1e-5,
                                          double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double orig = param.data()[k];
    param.data()[k] = orig + step;
    const double up = loss();
    param.data()[k] = orig - step;
    const double down = loss();
    param.data()[k] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.data()[k];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

// L2-regularised logistic regression fitted by full-batch gradient descent on
// standardised features; returns weighted F1 on the evaluation mask.
inline double logistic_probe_f1(const stgraph::Graph& g, const std::vector<std::uint8_t>& fit_mask,
                                const std::vector<std::uint8_t>& eval_mask, int iterations = 2000,
                                double lr = 0.5, double l2 = 1e-4) {
  const std::size_t n = g.num_nodes, f = g.feature_dim;
  std::vector<double> mean(f, 0.0), sd(f, 0.0);
  double fit_n = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (fit_mask[i]) {
      fit_n += 1.0;
      for (std::size_t j = 0; j < f; ++j) mean[j] += g.features[i * f + j];
    }
  for (auto& m : mean) m /= fit_n;
  for (std::size_t i = 0; i < n; ++i)
    if (fit_mask[i])
      for (std::size_t j = 0; j < f; ++j) sd[j] += std::pow(g.features[i * f + j] - mean[j], 2);
  for (auto& s : sd) s = std::sqrt(s / fit_n) + 1e-9;
  auto x = [&](std::size_t i, std::size_t j) { return (g.features[i * f + j] - mean[j]) / sd[j]; };

  std::vector<double> w(f, 0.0);
  double b = 0.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> gw(f, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!fit_mask[i]) continue;
      double z = b;
      for (std::size_t j = 0; j < f; ++j) z += w[j] * x(i, j);
      const double err = 1.0 / (1.0 + std::exp(-z)) - g.labels[i];
      for (std::size_t j = 0; j < f; ++j) gw[j] += err * x(i, j);
      gb += err;
    }
    for (std::size_t j = 0; j < f; ++j) w[j] -= lr * (gw[j] / fit_n + l2 * w[j]);
    b -= lr * gb / fit_n;
  }
  std::vector<int> yt, yp;
  for (std::size_t i = 0; i < n; ++i) {
    if (!eval_mask[i]) continue;
    double z = b;
    for (std::size_t j = 0; j < f; ++j) z += w[j] * x(i, j);
    yt.push_back(g.labels[i]);
    yp.push_back(z > 0.0 ? 1 : 0);
  }
  // Weighted F1 by hand from the definition.
  double score = 0.0;
  for (int c : {0, 1}) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t k = 0; k < yt.size(); ++k) {
      if (yt[k] == c) support += 1;
      if (yt[k] == c && yp[k] == c) tp += 1;
      if (yt[k] != c && yp[k] == c) fp += 1;
      if (yt[k] == c && yp[k] != c) fn += 1;
    }
    const double denom = 2 * tp + fp + fn;
    score += (denom > 0 ? 2 * tp / denom : 0.0) * support;
  }
  return score / static_cast<double>(yt.size());
}

}  // namespace oracle
