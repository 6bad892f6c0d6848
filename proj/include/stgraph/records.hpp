#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "stgraph/csv.hpp"
#include "stgraph/error.hpp"
#include "stgraph/io.hpp"
#include "stgraph/random.hpp"

namespace stgraph {

struct CrashRecord {
  std::string id;
  double latitude = 0.0;
  double longitude = 0.0;
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  int sae_level = 0;           // 0..5
  int severity = 0;            // 0 = not injured, 1 = injury
  std::string narrative;

  bool operator==(const CrashRecord&) const = default;
};

inline constexpr std::array<std::string_view, 8> kRecordHeader = {
    "id", "latitude", "longitude", "crash_date", "crash_time", "sae_level", "severity", "narrative"};

inline constexpr std::int64_t kSecondsPerDay = 86400;

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline int hour_of_day(std::int64_t timestamp) {
  return static_cast<int>((timestamp - floor_div(timestamp, kSecondsPerDay) * kSecondsPerDay) / 3600);
}

// 0 = Monday ... 6 = Sunday.
inline int weekday_of(std::int64_t timestamp) {
  const std::chrono::sys_days day{std::chrono::days{floor_div(timestamp, kSecondsPerDay)}};
  return static_cast<int>(std::chrono::weekday{day}.iso_encoding()) - 1;
}

// Maps "YYYY-MM-DD" + "HH:MM" onto UTC epoch seconds; false on any malformed part.
inline bool parse_date_time(std::string_view date, std::string_view time, std::int64_t& out) {
  date = io::trim(date);
  time = io::trim(time);
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') return false;
  if (time.size() != 5 || time[2] != ':') return false;
  int y = 0;
  unsigned mo = 0, d = 0, hh = 0, mm = 0;
  if (!io::parse_int(date.substr(0, 4), y) || !io::parse_int(date.substr(5, 2), mo) ||
      !io::parse_int(date.substr(8, 2), d) || !io::parse_int(time.substr(0, 2), hh) ||
      !io::parse_int(time.substr(3, 2), mm))
    return false;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok() || hh > 23 || mm > 59) return false;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  out = static_cast<std::int64_t>(days) * kSecondsPerDay + hh * 3600 + mm * 60;
  return true;
}

inline std::string format_date(std::int64_t timestamp) {
  const std::chrono::sys_days day{std::chrono::days{floor_div(timestamp, kSecondsPerDay)}};
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline std::string format_time(std::int64_t timestamp) {
  const std::int64_t secs = timestamp - floor_div(timestamp, kSecondsPerDay) * kSecondsPerDay;
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(secs / 3600), static_cast<int>(secs % 3600 / 60));
  return buf;
}

namespace detail {
inline std::string normalize_label(std::string_view raw) {
  raw = io::trim(raw);
  std::string s;
  bool space = false;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !s.empty()) s.push_back(' ');
    space = false;
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return s;
}
}  // namespace detail

// KABC scale plus "Not Injured" onto {0, 1}. Case-insensitive after trimming.
inline int binarize_severity(std::string_view raw) {
  const std::string s = detail::normalize_label(raw);
  if (s == "not injured") return 0;
  if (s == "killed" || s == "incapacitating injury" || s == "non-incapacitating injury" || s == "possible injury")
    return 1;
  throw DataError("unknown severity value '" + std::string(raw) + "'");
}

// Severity column of the ingest file: the five canonical scale values, the
// collapsed binary labels "Injury"/"Not Injured", or the digits 0/1.
inline int parse_severity_field(std::string_view raw) {
  const std::string s = detail::normalize_label(raw);
  if (s == "0") return 0;
  if (s == "1" || s == "injury") return 1;
  return binarize_severity(raw);
}

inline std::string_view severity_name(int severity) { return severity ? "Injury" : "Not Injured"; }

// Throws DataError describing the first violated invariant.
inline void validate(const CrashRecord& r) {
  if (r.id.empty()) throw DataError("record has an empty id");
  if (!(r.latitude >= -90.0 && r.latitude <= 90.0))
    throw DataError("record '" + r.id + "': latitude out of range");
  if (!(r.longitude >= -180.0 && r.longitude <= 180.0))
    throw DataError("record '" + r.id + "': longitude out of range");
  if (r.sae_level < 0 || r.sae_level > 5) throw DataError("record '" + r.id + "': sae_level out of range");
  if (r.severity != 0 && r.severity != 1) throw DataError("record '" + r.id + "': severity must be 0 or 1");
}

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<CrashRecord> records;
  std::vector<RejectedRow> rejected;
};

inline ParseResult parse_records_text(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw SchemaError("records file is empty; expected header");
  const auto& header = rows.front().fields;
  for (std::size_t i = 0; i < kRecordHeader.size(); ++i) {
    if (i >= header.size() || io::trim(header[i]) != kRecordHeader[i])
      throw SchemaError("records header: missing required column '" + std::string(kRecordHeader[i]) + "'");
  }
  if (header.size() != kRecordHeader.size()) throw SchemaError("records header has unexpected extra columns");

  ParseResult result;
  std::unordered_set<std::string> seen;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto& row = rows[k];
    auto reject = [&](std::string reason) { result.rejected.push_back({row.line, std::move(reason)}); };
    if (row.fields.size() != kRecordHeader.size()) {
      reject("expected 8 fields, found " + std::to_string(row.fields.size()));
      continue;
    }
    const auto& f = row.fields;
    CrashRecord r;
    r.id = std::string(io::trim(f[0]));
    r.narrative = f[7];
    if (r.id.empty()) {
      reject("empty id");
      continue;
    }
    if (!io::parse_double(f[1], r.latitude) || !io::parse_double(f[2], r.longitude)) {
      reject("unparseable coordinate");
      continue;
    }
    if (!parse_date_time(f[3], f[4], r.timestamp)) {
      reject("unparseable date/time");
      continue;
    }
    if (!io::parse_int(f[5], r.sae_level)) {
      reject("unparseable sae_level");
      continue;
    }
    try {
      r.severity = parse_severity_field(f[6]);
      validate(r);
    } catch (const DataError& e) {
      reject(e.what());
      continue;
    }
    if (!seen.insert(r.id).second) {
      reject("duplicate id '" + r.id + "'");
      continue;
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

inline ParseResult parse_records(const std::string& path) { return parse_records_text(csv::read_file(path)); }

inline std::string serialize_records(const std::vector<CrashRecord>& records) {
  std::string out;
  for (std::size_t i = 0; i < kRecordHeader.size(); ++i) {
    if (i) out.push_back(',');
    out += kRecordHeader[i];
  }
  out.push_back('\n');
  for (const auto& r : records) {
    out += csv::join({r.id, io::format_double(r.latitude), io::format_double(r.longitude), format_date(r.timestamp),
                      format_time(r.timestamp), std::to_string(r.sae_level), std::string(severity_name(r.severity)),
                      r.narrative});
    out.push_back('\n');
  }
  return out;
}

// Uniformly undersamples the majority class down to the minority count.
// Retained records keep their original relative order.
inline std::vector<CrashRecord> balance_undersample(const std::vector<CrashRecord>& records, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) by_class[records[i].severity].push_back(i);
  if (by_class[0].empty() || by_class[1].empty())
    throw DataError("cannot balance: input contains a single severity class");

  const int majority = by_class[0].size() >= by_class[1].size() ? 0 : 1;
  const std::size_t target = by_class[1 - majority].size();
  auto& pool = by_class[majority];
  Rng rng(seed);
  rng.shuffle(pool);
  pool.resize(target);

  std::vector<char> keep(records.size(), 0);
  for (const auto& cls : by_class)
    for (auto i : cls) keep[i] = 1;
  std::vector<CrashRecord> out;
  out.reserve(2 * target);
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

}  // namespace stgraph
