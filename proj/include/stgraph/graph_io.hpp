#pragma once

// Graph file: a JSON document with fields version, mode, meta, num_nodes,
// feature_dim, features (row-major), edges, labels, masks, node_ids and a
// checksum. The checksum is FNV-1a 64 over the document as written minus the
// checksum field; floats use 17 significant digits so a reload regenerates
// the identical payload.

#include <cstdio>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "stgraph/csv.hpp"
#include "stgraph/graph.hpp"
#include "stgraph/io.hpp"
#include "stgraph/random.hpp"

namespace stgraph {

inline constexpr int kGraphFileVersion = 1;

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

template <typename Range, typename Fn>
void append_array(std::string& out, const Range& range, Fn&& fmt) {
  out.push_back('[');
  bool first = true;
  for (const auto& v : range) {
    if (!first) out.push_back(',');
    first = false;
    out += fmt(v);
  }
  out.push_back(']');
}

inline std::string graph_payload(const Graph& g) {
  using nlohmann::json;
  const auto& m = g.meta;
  std::string out = "{\n";
  out += "\"version\":" + std::to_string(kGraphFileVersion) + ",\n";
  out += "\"mode\":\"" + to_string(m.mode) + "\",\n";
  out += "\"meta\":{\"dist_km\":" + io::format_double(m.dist_km) + ",\"window_h\":" + io::format_double(m.window_h) +
         ",\"resolution\":" + std::to_string(m.resolution) + ",\"origin_lat\":" + io::format_double(m.origin.latitude) +
         ",\"origin_lon\":" + io::format_double(m.origin.longitude) +
         ",\"layout_version\":" + std::to_string(m.layout_version) + ",\"provider\":" + json(m.provider).dump() +
         ",\"split_seed\":" + std::to_string(m.split_seed) + ",\"tie_cells\":" + std::to_string(m.tie_cells) + "},\n";
  out += "\"num_nodes\":" + std::to_string(g.num_nodes) + ",\n";
  out += "\"feature_dim\":" + std::to_string(g.feature_dim) + ",\n";
  out += "\"features\":";
  append_array(out, g.features, io::format_double);
  out += ",\n\"edges\":";
  append_array(out, g.edges,
               [](const Edge& e) { return "[" + std::to_string(e.src) + "," + std::to_string(e.dst) + "]"; });
  auto ints = [](auto v) { return std::to_string(v); };
  out += ",\n\"labels\":";
  append_array(out, g.labels, ints);
  out += ",\n\"masks\":{\"train\":";
  append_array(out, g.masks.train, ints);
  out += ",\"val\":";
  append_array(out, g.masks.val, ints);
  out += ",\"test\":";
  append_array(out, g.masks.test, ints);
  out += "},\n\"node_ids\":";
  append_array(out, g.node_ids, [](const std::string& s) { return json(s).dump(); });
  return out;
}

}  // namespace detail

inline std::string serialize_graph(const Graph& g) {
  validate_graph(g);
  std::string out = detail::graph_payload(g);
  const auto sum = fnv1a64(out);
  out += ",\n\"checksum\":\"fnv1a64:" + detail::hex64(sum) + "\"\n}\n";
  return out;
}

inline Graph parse_graph(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("graph file is not valid JSON: ") + e.what());
  }
  Graph g;
  try {
    if (doc.at("version").get<int>() != kGraphFileVersion)
      throw DataError("graph file version " + doc.at("version").dump() + " is not supported");
    g.meta.mode = parse_graph_mode(doc.at("mode").get<std::string>());
    const auto& m = doc.at("meta");
    g.meta.dist_km = m.at("dist_km").get<double>();
    g.meta.window_h = m.at("window_h").get<double>();
    g.meta.resolution = m.at("resolution").get<int>();
    g.meta.origin = {m.at("origin_lat").get<double>(), m.at("origin_lon").get<double>()};
    g.meta.layout_version = m.at("layout_version").get<int>();
    g.meta.provider = m.at("provider").get<std::string>();
    g.meta.split_seed = m.at("split_seed").get<std::uint64_t>();
    g.meta.tie_cells = m.at("tie_cells").get<std::size_t>();
    g.num_nodes = doc.at("num_nodes").get<std::size_t>();
    g.feature_dim = doc.at("feature_dim").get<std::size_t>();
    g.features = doc.at("features").get<std::vector<double>>();
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw DataError("edge entries must be [src, dst] pairs");
      const auto s = e[0].get<std::int64_t>(), d = e[1].get<std::int64_t>();
      if (s < 0 || d < 0 || static_cast<std::uint64_t>(s) >= g.num_nodes ||
          static_cast<std::uint64_t>(d) >= g.num_nodes)
        throw DataError("edge endpoint out of range [0, " + std::to_string(g.num_nodes) + ")");
      g.edges.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(d)});
    }
    g.labels = doc.at("labels").get<std::vector<int>>();
    const auto& masks = doc.at("masks");
    g.masks.train = masks.at("train").get<std::vector<std::uint8_t>>();
    g.masks.val = masks.at("val").get<std::vector<std::uint8_t>>();
    g.masks.test = masks.at("test").get<std::vector<std::uint8_t>>();
    g.node_ids = doc.at("node_ids").get<std::vector<std::string>>();
    const auto checksum = doc.at("checksum").get<std::string>();
    if (g.meta.layout_version != kFeatureLayoutVersion)
      throw DataError("feature layout version " + std::to_string(g.meta.layout_version) + " is not supported");
    validate_graph(g);
    const std::string expected = "fnv1a64:" + detail::hex64(fnv1a64(detail::graph_payload(g)));
    if (checksum != expected) throw DataError("graph checksum mismatch (file corrupted or edited)");
  } catch (const json::exception& e) {
    throw DataError(std::string("graph file is malformed: ") + e.what());
  }
  return g;
}

inline void save_graph(const Graph& g, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_graph(g));
}

inline Graph load_graph(const std::filesystem::path& path) { return parse_graph(csv::read_file(path.string())); }

}  // namespace stgraph
