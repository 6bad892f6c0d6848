#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stgraph/error.hpp"
#include "stgraph/features.hpp"
#include "stgraph/geo_hex.hpp"
#include "stgraph/random.hpp"
#include "stgraph/records.hpp"

namespace stgraph {

inline constexpr int kFeatureLayoutVersion = 1;
inline constexpr std::size_t kCoarseFeatureDim = 6 + 2 + 24 + 7 + kEmbeddingDim;  // 423

enum class GraphMode { fine, coarse };

inline std::string to_string(GraphMode m) { return m == GraphMode::fine ? "fine" : "coarse"; }

inline GraphMode parse_graph_mode(std::string_view s) {
  if (s == "fine") return GraphMode::fine;
  if (s == "coarse") return GraphMode::coarse;
  throw ConfigError("unknown graph mode '" + std::string(s) + "' (expected fine|coarse)");
}

inline std::size_t expected_feature_dim(GraphMode m) {
  return m == GraphMode::fine ? kFineFeatureDim : kCoarseFeatureDim;
}

struct GraphMeta {
  GraphMode mode = GraphMode::fine;
  double dist_km = 30.0;
  double window_h = 24.0;
  int resolution = 7;
  GeoPoint origin{};
  int layout_version = kFeatureLayoutVersion;
  std::string provider = "hash";
  std::uint64_t split_seed = 0;
  std::size_t tie_cells = 0;

  bool operator==(const GraphMeta& o) const {
    return mode == o.mode && dist_km == o.dist_km && window_h == o.window_h && resolution == o.resolution &&
           origin.latitude == o.origin.latitude && origin.longitude == o.origin.longitude &&
           layout_version == o.layout_version && provider == o.provider && split_seed == o.split_seed &&
           tie_cells == o.tie_cells;
  }
};

struct Edge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  auto operator<=>(const Edge&) const = default;
};

struct Masks {
  std::vector<std::uint8_t> train, val, test;
  bool operator==(const Masks&) const = default;
};

struct Graph {
  std::size_t num_nodes = 0;
  std::size_t feature_dim = 0;
  std::vector<double> features;  // row-major num_nodes x feature_dim
  std::vector<Edge> edges;       // directed, sorted by (src, dst)
  std::vector<int> labels;
  Masks masks;
  std::vector<std::string> node_ids;  // record ids (fine) or cell ids (coarse)
  GraphMeta meta;

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * feature_dim, feature_dim};
  }

  bool operator==(const Graph&) const = default;
};

inline std::size_t count(const std::vector<std::uint8_t>& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

// Throws DataError on the first broken structural invariant.
inline void validate_graph(const Graph& g) {
  const std::size_t n = g.num_nodes;
  if (g.feature_dim != expected_feature_dim(g.meta.mode))
    throw ShapeError("feature_dim " + std::to_string(g.feature_dim) + " does not match " + to_string(g.meta.mode) +
                     " layout (" + std::to_string(expected_feature_dim(g.meta.mode)) + ")");
  if (g.features.size() != n * g.feature_dim) throw ShapeError("feature matrix size does not match N x F");
  if (g.labels.size() != n) throw ShapeError("labels length does not match num_nodes");
  if (!g.node_ids.empty() && g.node_ids.size() != n) throw ShapeError("node_ids length does not match num_nodes");
  for (int y : g.labels)
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
  for (double v : g.features)
    if (!std::isfinite(v)) throw DataError("non-finite node feature");
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    if (e.src >= n || e.dst >= n) throw DataError("edge endpoint out of range");
    if (e.src == e.dst) throw DataError("self-loop edge");
    if (k > 0 && !(g.edges[k - 1] < e)) throw DataError("edge list not sorted and unique");
  }
  for (const auto& e : g.edges)
    if (!std::binary_search(g.edges.begin(), g.edges.end(), Edge{e.dst, e.src}))
      throw DataError("edge list not closed under reversal");

  const auto& m = g.masks;
  const bool any = !m.train.empty() || !m.val.empty() || !m.test.empty();
  if (any) {
    if (m.train.size() != n || m.val.size() != n || m.test.size() != n)
      throw ShapeError("mask lengths do not match num_nodes");
    for (std::size_t i = 0; i < n; ++i) {
      const int s = m.train[i] + m.val[i] + m.test[i];
      if (m.train[i] > 1 || m.val[i] > 1 || m.test[i] > 1) throw DataError("mask entries must be 0 or 1");
      if (s > 1) throw DataError("masks overlap at node " + std::to_string(i));
      if (s == 0) throw DataError("masks do not cover node " + std::to_string(i));
    }
  }
}

inline void canonicalize_edges(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

struct FineOptions {
  double dist_km = 30.0;
  double window_h = 24.0;
};

inline bool within_window(std::int64_t t1, std::int64_t t2, double window_h) {
  const auto dt = t1 > t2 ? t1 - t2 : t2 - t1;
  return static_cast<double>(dt) <= window_h * 3600.0;
}

// Undirected spatio-temporal pairs (i < j) with both predicates inclusive.
// Pairs are enumerated in timestamp order and the scan stops once the time
// gap exceeds the window.
inline std::vector<Edge> fine_edges(const std::vector<CrashRecord>& records, const FineOptions& opt) {
  const std::size_t n = records.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0U);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return records[a].timestamp < records[b].timestamp; });
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < n; ++a) {
    const auto& ra = records[order[a]];
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto& rb = records[order[b]];
      if (!within_window(ra.timestamp, rb.timestamp, opt.window_h)) break;
      if (haversine_km({ra.latitude, ra.longitude}, {rb.latitude, rb.longitude}) <= opt.dist_km) {
        edges.push_back({order[a], order[b]});
        edges.push_back({order[b], order[a]});
      }
    }
  }
  canonicalize_edges(edges);
  return edges;
}

inline Graph build_fine(const std::vector<CrashRecord>& records, const EmbeddingProvider& provider,
                        const FineOptions& opt = {}) {
  if (records.empty()) throw DataError("cannot build a graph from zero records");
  if (!(opt.dist_km >= 0) || !(opt.window_h >= 0)) throw ConfigError("fine thresholds must be non-negative");
  Graph g;
  g.num_nodes = records.size();
  g.feature_dim = kFineFeatureDim;
  g.features.reserve(g.num_nodes * g.feature_dim);
  for (const auto& r : records) {
    validate(r);
    const Embedding e = provider.embed(r);
    const auto x = fine_node_features(r, e);
    g.features.insert(g.features.end(), x.begin(), x.end());
    g.labels.push_back(r.severity);
    g.node_ids.push_back(r.id);
  }
  g.edges = fine_edges(records, opt);
  g.meta.mode = GraphMode::fine;
  g.meta.dist_km = opt.dist_km;
  g.meta.window_h = opt.window_h;
  g.meta.provider = provider.name();
  return g;
}

struct CellAggregate {
  std::array<double, 6> sae_hist{};
  std::array<double, 2> severity_counts{};  // not injured, injury
  std::array<double, 24> hour_hist{};
  std::array<double, 7> weekday_hist{};
  Embedding embedding_sum{};
  std::size_t crashes = 0;

  void add(const CrashRecord& r, const Embedding& e) {
    sae_hist[static_cast<std::size_t>(r.sae_level)] += 1;
    severity_counts[static_cast<std::size_t>(r.severity)] += 1;
    hour_hist[static_cast<std::size_t>(hour_of_day(r.timestamp))] += 1;
    weekday_hist[static_cast<std::size_t>(weekday_of(r.timestamp))] += 1;
    for (std::size_t j = 0; j < kEmbeddingDim; ++j) embedding_sum[j] += e[j];
    ++crashes;
  }

  // Injury only when it strictly outnumbers no-injury; ties go to 0.
  int label() const { return severity_counts[1] > severity_counts[0] ? 1 : 0; }
  bool tie() const { return severity_counts[1] == severity_counts[0]; }

  // [sae_hist(6), severity_counts(2), hour_hist(24), weekday_hist(7), mean embedding(384)]
  std::vector<double> features() const {
    std::vector<double> x;
    x.reserve(kCoarseFeatureDim);
    x.insert(x.end(), sae_hist.begin(), sae_hist.end());
    x.insert(x.end(), severity_counts.begin(), severity_counts.end());
    x.insert(x.end(), hour_hist.begin(), hour_hist.end());
    x.insert(x.end(), weekday_hist.begin(), weekday_hist.end());
    const double inv = crashes ? 1.0 / static_cast<double>(crashes) : 0.0;
    for (double s : embedding_sum) x.push_back(s * inv);
    return x;
  }
};

struct CoarseOptions {
  int resolution = 7;
  std::optional<GeoPoint> origin;  // defaults to the record centroid
};

inline GeoPoint centroid(const std::vector<CrashRecord>& records) {
  double lat = 0.0, lon = 0.0;
  for (const auto& r : records) {
    lat += r.latitude;
    lon += r.longitude;
  }
  const double n = static_cast<double>(records.size());
  return {lat / n, lon / n};
}

inline Graph build_coarse(const std::vector<CrashRecord>& records, const EmbeddingProvider& provider,
                          const CoarseOptions& opt = {}) {
  if (records.empty()) throw DataError("cannot build a graph from zero records");
  for (const auto& r : records) validate(r);
  const GeoPoint origin = opt.origin.value_or(centroid(records));
  const PlanarHexIndex index(origin, opt.resolution);

  // Keyed by the printable id so node order is CellId-string ascending.
  std::map<std::string, std::pair<CellId, CellAggregate>> cells;
  for (const auto& r : records) {
    CellId c;
    try {
      c = index.cell_of({r.latitude, r.longitude});
    } catch (const DataError& e) {
      throw DataError("record '" + r.id + "': " + e.what());
    }
    auto [it, inserted] = cells.try_emplace(c.to_string(), c, CellAggregate{});
    it->second.second.add(r, provider.embed(r));
  }

  Graph g;
  g.num_nodes = cells.size();
  g.feature_dim = kCoarseFeatureDim;
  std::map<CellId, std::uint32_t> node_of;
  for (const auto& [key, entry] : cells) {
    const auto& [cell, agg] = entry;
    node_of.emplace(cell, static_cast<std::uint32_t>(g.node_ids.size()));
    g.node_ids.push_back(key);
    const auto x = agg.features();
    g.features.insert(g.features.end(), x.begin(), x.end());
    g.labels.push_back(agg.label());
    if (agg.tie()) ++g.meta.tie_cells;
  }
  for (const auto& [cell, node] : node_of) {
    for (const auto& nb : index.neighbors(cell)) {
      auto it = node_of.find(nb);
      if (it != node_of.end()) g.edges.push_back({node, it->second});
    }
  }
  canonicalize_edges(g.edges);
  g.meta.mode = GraphMode::coarse;
  g.meta.resolution = opt.resolution;
  g.meta.origin = origin;
  g.meta.provider = provider.name();
  return g;
}

struct SplitRatios {
  double train = 0.70;
  double val = 0.20;
  double test = 0.10;
};

// Seeded uniform permutation cut at floor(n * cumulative ratio). Optional
// stratification applies the same cut within each label class.
inline Masks split_masks(std::size_t n, const SplitRatios& ratios, std::uint64_t seed,
                         const std::vector<int>* stratify_labels = nullptr) {
  if (n < 3) throw ConfigError("split needs at least 3 nodes");
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be positive and sum to 1");

  Masks m;
  m.train.assign(n, 0);
  m.val.assign(n, 0);
  m.test.assign(n, 0);
  Rng rng(seed);
  auto cut = [&](std::vector<std::size_t>& ids) {
    rng.shuffle(ids);
    const double k = static_cast<double>(ids.size());
    const auto c1 = static_cast<std::size_t>(std::floor(ratios.train * k + 1e-9));
    const auto c2 = static_cast<std::size_t>(std::floor((ratios.train + ratios.val) * k + 1e-9));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto& mask = i < c1 ? m.train : (i < c2 ? m.val : m.test);
      mask[ids[i]] = 1;
    }
  };
  if (stratify_labels) {
    if (stratify_labels->size() != n) throw ShapeError("stratification labels length mismatch");
    for (int cls : {0, 1}) {
      std::vector<std::size_t> ids;
      for (std::size_t i = 0; i < n; ++i)
        if ((*stratify_labels)[i] == cls) ids.push_back(i);
      cut(ids);
    }
  } else {
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    cut(ids);
  }
  return m;
}

inline void assign_split(Graph& g, const SplitRatios& ratios, std::uint64_t seed, bool stratified = false) {
  g.masks = split_masks(g.num_nodes, ratios, seed, stratified ? &g.labels : nullptr);
  g.meta.split_seed = seed;
}

}  // namespace stgraph
