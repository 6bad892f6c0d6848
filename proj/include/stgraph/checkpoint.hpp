#pragma once

// Parameter checkpoint: JSON with the model/training config, named parameter
// shapes with row-major values (17 significant digits), and an FNV-1a 64
// checksum over the document minus the checksum field.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "stgraph/csv.hpp"
#include "stgraph/graph_io.hpp"
#include "stgraph/io.hpp"
#include "stgraph/models.hpp"
#include "stgraph/training.hpp"

namespace stgraph {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  ModelParams params;
  std::size_t epoch = 0;  // epoch the parameters were taken from

  bool operator==(const Checkpoint&) const = default;
};

namespace detail {

inline std::string checkpoint_payload(const Checkpoint& c) {
  using nlohmann::json;
  const auto& m = c.config.model;
  std::string out = "{\n\"version\":" + std::to_string(kCheckpointVersion) + ",\n";
  out += "\"config\":{\"arch\":\"" + to_string(m.arch) + "\",\"hidden_dim\":" + std::to_string(m.hidden_dim) +
         ",\"num_blocks\":" + std::to_string(m.num_blocks) + ",\"dropout\":" + io::format_double(m.dropout) +
         ",\"temporal_kernel\":" + std::to_string(m.temporal_kernel) + ",\"lr\":" + io::format_double(c.config.lr) +
         ",\"weight_decay\":" + io::format_double(c.config.weight_decay) +
         ",\"epochs\":" + std::to_string(c.config.epochs) + ",\"seed\":" + std::to_string(c.config.seed) + "},\n";
  out += "\"input_dim\":" + std::to_string(c.params.input_dim) + ",\n";
  out += "\"epoch\":" + std::to_string(c.epoch) + ",\n";
  out += "\"params\":[";
  for (std::size_t k = 0; k < c.params.entries.size(); ++k) {
    const auto& p = c.params.entries[k];
    if (k) out += ",";
    out += "\n{\"name\":" + json(p.name).dump() + ",\"rows\":" + std::to_string(p.value.rows()) +
           ",\"cols\":" + std::to_string(p.value.cols()) + ",\"values\":";
    append_array(out, p.value.data(), io::format_double);
    out += "}";
  }
  out += "]";
  return out;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
  std::string out = detail::checkpoint_payload(c);
  out += ",\n\"checksum\":\"fnv1a64:" + detail::hex64(fnv1a64(out)) + "\"\n}\n";
  return out;
}

inline Checkpoint parse_checkpoint(std::string_view text) {
  using nlohmann::json;
  Checkpoint c;
  try {
    const json doc = json::parse(text);
    if (doc.at("version").get<int>() != kCheckpointVersion) throw DataError("unsupported checkpoint version");
    const auto& cfg = doc.at("config");
    c.config.model.arch = parse_arch(cfg.at("arch").get<std::string>());
    c.config.model.hidden_dim = cfg.at("hidden_dim").get<std::size_t>();
    c.config.model.num_blocks = cfg.at("num_blocks").get<std::size_t>();
    c.config.model.dropout = cfg.at("dropout").get<double>();
    c.config.model.temporal_kernel = cfg.at("temporal_kernel").get<std::size_t>();
    c.config.lr = cfg.at("lr").get<double>();
    c.config.weight_decay = cfg.at("weight_decay").get<double>();
    c.config.epochs = cfg.at("epochs").get<std::size_t>();
    c.config.seed = cfg.at("seed").get<std::uint64_t>();
    c.config.validate();
    c.params.input_dim = doc.at("input_dim").get<std::size_t>();
    c.epoch = doc.at("epoch").get<std::size_t>();
    for (const auto& p : doc.at("params")) {
      const auto rows = p.at("rows").get<std::size_t>(), cols = p.at("cols").get<std::size_t>();
      c.params.entries.push_back({p.at("name").get<std::string>(),
                                  Matrix(rows, cols, p.at("values").get<std::vector<double>>())});
    }
    const auto layout = parameter_layout(c.config.model, c.params.input_dim);
    if (layout.size() != c.params.entries.size()) throw ShapeError("checkpoint parameter list does not match its config");
    for (std::size_t k = 0; k < layout.size(); ++k) {
      if (layout[k].name != c.params.entries[k].name || !layout[k].value.same_shape(c.params.entries[k].value))
        throw ShapeError("checkpoint parameter '" + c.params.entries[k].name + "' does not match its config");
    }
    const std::string expected = "fnv1a64:" + detail::hex64(fnv1a64(detail::checkpoint_payload(c)));
    if (doc.at("checksum").get<std::string>() != expected) throw DataError("checkpoint checksum mismatch");
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint is malformed: ") + e.what());
  }
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(csv::read_file(path.string()));
}

}  // namespace stgraph
