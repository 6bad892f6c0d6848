#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stgraph/csv.hpp"
#include "stgraph/error.hpp"
#include "stgraph/io.hpp"
#include "stgraph/random.hpp"
#include "stgraph/records.hpp"

namespace stgraph {

inline constexpr std::size_t kEmbeddingDim = 384;
inline constexpr std::size_t kFineNumericDim = 5;
inline constexpr std::size_t kFineFeatureDim = kFineNumericDim + kEmbeddingDim;  // 389

using Embedding = std::array<double, kEmbeddingDim>;

struct CyclicPair {
  double sin = 0.0;
  double cos = 1.0;
};

inline CyclicPair encode_hour(int hour) {
  if (hour < 0 || hour > 23) throw DataError("hour out of range [0, 23]: " + std::to_string(hour));
  const double angle = 2.0 * std::numbers::pi * hour / 24.0;
  return {std::sin(angle), std::cos(angle)};
}

inline CyclicPair encode_weekday(int day) {
  if (day < 0 || day > 6) throw DataError("weekday out of range [0, 6]: " + std::to_string(day));
  const double angle = 2.0 * std::numbers::pi * day / 7.0;
  return {std::sin(angle), std::cos(angle)};
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) && u < 0x80) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline constexpr std::uint64_t kTokenHashSeed = 0x5354475241504831ULL;

// Token hash: FNV-1a 64 xor seed, finalized with splitmix64.
inline std::uint64_t token_hash(std::string_view token) { return splitmix64(fnv1a64(token) ^ kTokenHashSeed); }

// Signed feature hashing of lowercase alphanumeric tokens. The bin is
// hash mod 384; the sign comes from the lowest bit of the quotient.
inline Embedding embed_hash(std::string_view narrative) {
  Embedding e{};
  for (const auto& tok : tokenize(narrative)) {
    const std::uint64_t h = token_hash(tok);
    const std::size_t bin = h % kEmbeddingDim;
    const double sign = ((h / kEmbeddingDim) & 1U) ? -1.0 : 1.0;
    e[bin] += sign;
  }
  double norm2 = 0.0;
  for (double v : e) norm2 += v * v;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : e) v *= inv;
  }
  return e;
}

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  virtual Embedding embed(const CrashRecord& record) const = 0;
  virtual std::string name() const = 0;
};

class HashEmbeddingProvider final : public EmbeddingProvider {
public:
  Embedding embed(const CrashRecord& record) const override { return embed_hash(record.narrative); }
  std::string name() const override { return "hash"; }
};

// Externally computed embeddings keyed by record id, used verbatim.
class EmbeddingTable final : public EmbeddingProvider {
public:
  EmbeddingTable() = default;

  void insert(std::string id, const Embedding& e) {
    if (!table_.emplace(id, e).second) throw DataError("duplicate embedding id '" + id + "'");
  }

  std::size_t size() const { return table_.size(); }

  const Embedding& at(const std::string& id) const {
    auto it = table_.find(id);
    if (it == table_.end()) throw DataError("missing embedding for record '" + id + "'");
    return it->second;
  }

  Embedding embed(const CrashRecord& record) const override { return at(record.id); }
  std::string name() const override { return "file"; }

private:
  std::unordered_map<std::string, Embedding> table_;
};

inline EmbeddingTable parse_embeddings_text(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw SchemaError("embedding file is empty; expected header");
  const auto& header = rows.front().fields;
  if (header.size() != kEmbeddingDim + 1 || io::trim(header[0]) != "id")
    throw SchemaError("embedding header must be id,e0,...,e383");
  for (std::size_t j = 0; j < kEmbeddingDim; ++j)
    if (io::trim(header[j + 1]) != "e" + std::to_string(j))
      throw SchemaError("embedding header column " + std::to_string(j + 1) + " must be e" + std::to_string(j));

  EmbeddingTable table;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& row = rows[k];
    if (row.fields.size() != kEmbeddingDim + 1)
      throw DataError("embedding row at line " + std::to_string(row.line) + " has " +
                      std::to_string(row.fields.size() - 1) + " values, expected 384");
    Embedding e{};
    for (std::size_t j = 0; j < kEmbeddingDim; ++j) {
      if (!io::parse_double(row.fields[j + 1], e[j]) || !std::isfinite(e[j]))
        throw DataError("embedding row at line " + std::to_string(row.line) + ": bad value in column e" +
                        std::to_string(j));
    }
    table.insert(std::string(io::trim(row.fields[0])), e);
  }
  return table;
}

inline EmbeddingTable load_embeddings(const std::string& path) { return parse_embeddings_text(csv::read_file(path)); }

inline std::string serialize_embeddings(const std::vector<std::pair<std::string, Embedding>>& rows) {
  std::string out = "id";
  for (std::size_t j = 0; j < kEmbeddingDim; ++j) out += ",e" + std::to_string(j);
  out.push_back('\n');
  for (const auto& [id, e] : rows) {
    out += csv::quote(id);
    for (double v : e) {
      out.push_back(',');
      out += io::format_double(v);
    }
    out.push_back('\n');
  }
  return out;
}

// Layout: [sae_level, hour_sin, hour_cos, weekday_sin, weekday_cos, emb 0..383].
inline std::vector<double> fine_node_features(const CrashRecord& record, std::span<const double> embedding) {
  if (embedding.size() != kEmbeddingDim)
    throw ShapeError("embedding for '" + record.id + "' has dimension " + std::to_string(embedding.size()));
  const auto h = encode_hour(hour_of_day(record.timestamp));
  const auto d = encode_weekday(weekday_of(record.timestamp));
  std::vector<double> x;
  x.reserve(kFineFeatureDim);
  x.insert(x.end(), {static_cast<double>(record.sae_level), h.sin, h.cos, d.sin, d.cos});
  x.insert(x.end(), embedding.begin(), embedding.end());
  return x;
}

}  // namespace stgraph
