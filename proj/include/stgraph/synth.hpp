#pragma once

// Seeded synthetic crash records with plantable spatial, temporal and
// narrative signal. Hotspots are Gaussian blobs several hexagons wide so the
// spatial signal lives at cell granularity.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "stgraph/csv.hpp"
#include "stgraph/error.hpp"
#include "stgraph/geo_hex.hpp"
#include "stgraph/io.hpp"
#include "stgraph/random.hpp"
#include "stgraph/records.hpp"

namespace stgraph {

struct BoundingBox {
  double lat_min = 29.7;
  double lat_max = 31.3;
  double lon_min = -98.5;
  double lon_max = -96.9;
};

struct SynthParams {
  std::size_t n_records = 2352;
  BoundingBox box{};
  std::size_t n_hotspots = 8;
  double hotspot_radius_km = 4.0;  // Gaussian sigma
  double hotspot_share = 0.6;      // fraction of candidates drawn from hotspots
  double p_injury_in_hotspot = 0.95;
  double p_injury_background = 0.05;
  std::set<int> rush_hours{7, 8, 16, 17, 18};
  double rush_hour_odds = 1.5;     // injury-odds multiplier during rush hours
  double rush_hour_weight = 2.0;   // relative frequency of rush-hour crashes
  double narrative_signal = 0.35;  // chance a narrative carries a class-specific phrase
  bool balanced = true;            // emit exactly n/2 records per class
  int year = 2024;
  std::uint64_t seed = 20240101;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (n_records == 0) throw ConfigError("n_records must be positive");
    if (balanced && n_records % 2 != 0) throw ConfigError("balanced generation needs an even n_records");
    if (!(box.lat_min < box.lat_max && box.lon_min < box.lon_max)) throw ConfigError("degenerate bounding box");
    if (box.lat_min < -90 || box.lat_max > 90 || box.lon_min < -180 || box.lon_max > 180)
      throw ConfigError("bounding box outside valid coordinates");
    if (!prob(p_injury_in_hotspot) || !prob(p_injury_background) || !prob(hotspot_share) || !prob(narrative_signal))
      throw ConfigError("synth probabilities must lie in [0, 1]");
    if (hotspot_share > 0 && n_hotspots == 0) throw ConfigError("hotspot_share > 0 needs at least one hotspot");
    if (!(hotspot_radius_km > 0)) throw ConfigError("hotspot_radius_km must be positive");
    if (!(rush_hour_odds > 0) || !(rush_hour_weight > 0)) throw ConfigError("rush-hour factors must be positive");
    for (int h : rush_hours)
      if (h < 0 || h > 23) throw ConfigError("rush hour out of range");
  }

  // No spatial, temporal or narrative signal; labels are coin flips.
  static SynthParams null_model() {
    SynthParams p;
    p.p_injury_in_hotspot = 0.5;
    p.p_injury_background = 0.5;
    p.rush_hours.clear();
    p.narrative_signal = 0.0;
    return p;
  }
};

struct TruthRow {
  std::string id;
  std::string component;  // "hotspot<k>" or "background"
  double injury_odds = 0.0;
};

struct SynthOutput {
  std::vector<CrashRecord> records;
  std::vector<TruthRow> truth;
  std::vector<GeoPoint> hotspot_centers;
};

namespace detail {

inline constexpr std::array<const char*, 6> kNeutralPhrases = {
    "unit 1 was traveling north in the right lane",
    "unit 2 was stopped at the traffic signal",
    "vehicle was operating with automated driving engaged",
    "unit 1 changed lanes near the intersection",
    "driver reported wet pavement and light traffic",
    "unit 2 was merging from the frontage road",
};
inline constexpr std::array<const char*, 5> kInjuryPhrases = {
    "unit 1 failed to control speed and struck unit 2",
    "unit 2 struck the pedestrian in the crosswalk",
    "driver was transported with visible injuries",
    "vehicle struck the barrier at high speed",
    "occupant complained of pain and was taken by ambulance",
};
inline constexpr std::array<const char*, 5> kNoInjuryPhrases = {
    "minor scrape while parking with no complaint of pain",
    "unit 1 backed into unit 2 at low speed",
    "light contact with the curb and no injuries reported",
    "side mirror clipped in slow traffic",
    "vehicles exchanged information and drove away",
};
inline constexpr std::array<double, 6> kSaeWeights = {0.30, 0.25, 0.20, 0.12, 0.08, 0.05};

template <typename Arr>
const char* pick(Rng& rng, const Arr& a) {
  return a[static_cast<std::size_t>(rng.below(a.size()))];
}

inline double odds_of(double p) { return p >= 1.0 ? std::numeric_limits<double>::infinity() : p / (1.0 - p); }
inline double prob_of(double odds) { return std::isinf(odds) ? 1.0 : odds / (1.0 + odds); }

}  // namespace detail

inline SynthOutput generate(const SynthParams& params) {
  params.validate();
  Rng rng(params.seed);
  SynthOutput out;
  const auto& box = params.box;
  const double km_per_deg = kEarthRadiusKm * std::numbers::pi / 180.0;

  // Hotspot centres keep a 10% margin from the box edge.
  for (std::size_t k = 0; k < params.n_hotspots; ++k) {
    const double lat = rng.uniform(box.lat_min + 0.1 * (box.lat_max - box.lat_min), box.lat_max - 0.1 * (box.lat_max - box.lat_min));
    const double lon = rng.uniform(box.lon_min + 0.1 * (box.lon_max - box.lon_min), box.lon_max - 0.1 * (box.lon_max - box.lon_min));
    out.hotspot_centers.push_back({lat, lon});
  }

  std::array<double, 24> hour_weight{};
  double hour_total = 0.0;
  for (int h = 0; h < 24; ++h) hour_total += hour_weight[static_cast<std::size_t>(h)] =
                                   params.rush_hours.count(h) ? params.rush_hour_weight : 1.0;

  std::int64_t year_start = 0, year_end = 0;
  parse_date_time(std::to_string(params.year) + "-01-01", "00:00", year_start);
  parse_date_time(std::to_string(params.year + 1) + "-01-01", "00:00", year_end);
  const auto n_days = static_cast<std::uint64_t>((year_end - year_start) / kSecondsPerDay);

  std::array<std::size_t, 2> quota{params.n_records / 2, params.n_records / 2};
  std::array<std::size_t, 2> emitted{};
  const std::size_t max_attempts = 1000 * params.n_records + 10000;
  std::size_t attempts = 0;

  while (out.records.size() < params.n_records) {
    if (++attempts > max_attempts)
      throw ConfigError("synth: could not fill the balanced class quota; probabilities are too extreme");

    CrashRecord r;
    TruthRow truth;
    double p_injury;
    const bool hotspot = params.n_hotspots > 0 && rng.bernoulli(params.hotspot_share);
    if (hotspot) {
      const auto k = static_cast<std::size_t>(rng.below(params.n_hotspots));
      const auto& c = out.hotspot_centers[k];
      const double dy = rng.normal() * params.hotspot_radius_km;
      const double dx = rng.normal() * params.hotspot_radius_km;
      r.latitude = std::clamp(c.latitude + dy / km_per_deg, -90.0, 90.0);
      r.longitude = std::clamp(c.longitude + dx / (km_per_deg * std::cos(deg2rad(c.latitude))), -180.0, 180.0);
      truth.component = "hotspot" + std::to_string(k);
      p_injury = params.p_injury_in_hotspot;
    } else {
      r.latitude = rng.uniform(box.lat_min, box.lat_max);
      r.longitude = rng.uniform(box.lon_min, box.lon_max);
      truth.component = "background";
      p_injury = params.p_injury_background;
    }

    double u = rng.uniform() * hour_total;
    int hour = 0;
    while (hour < 23 && u >= hour_weight[static_cast<std::size_t>(hour)]) u -= hour_weight[static_cast<std::size_t>(hour++)];
    const auto day = static_cast<std::int64_t>(rng.below(n_days));
    const auto minute = static_cast<std::int64_t>(rng.below(60));
    r.timestamp = year_start + day * kSecondsPerDay + hour * 3600 + minute * 60;

    double odds = detail::odds_of(p_injury);
    if (params.rush_hours.count(hour) && p_injury > 0.0 && p_injury < 1.0) odds *= params.rush_hour_odds;
    truth.injury_odds = odds;
    r.severity = rng.bernoulli(detail::prob_of(odds)) ? 1 : 0;

    double s = rng.uniform();
    r.sae_level = 0;
    while (r.sae_level < 5 && s >= detail::kSaeWeights[static_cast<std::size_t>(r.sae_level)])
      s -= detail::kSaeWeights[static_cast<std::size_t>(r.sae_level++)];

    r.narrative = detail::pick(rng, detail::kNeutralPhrases);
    if (rng.bernoulli(params.narrative_signal)) {
      r.narrative += "; ";
      r.narrative += r.severity ? detail::pick(rng, detail::kInjuryPhrases) : detail::pick(rng, detail::kNoInjuryPhrases);
    } else {
      r.narrative += "; ";
      r.narrative += detail::pick(rng, detail::kNeutralPhrases);
    }

    if (params.balanced) {
      const auto cls = static_cast<std::size_t>(r.severity);
      if (emitted[cls] >= quota[cls]) continue;
      ++emitted[cls];
    }
    char id[32];
    std::snprintf(id, sizeof id, "s%06zu", out.records.size() + 1);
    r.id = id;
    truth.id = r.id;
    out.records.push_back(std::move(r));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

inline std::string serialize_truth(const std::vector<TruthRow>& truth) {
  std::string out = "id,component,injury_odds\n";
  for (const auto& t : truth) out += csv::join({t.id, t.component, io::format_double(t.injury_odds)}) + "\n";
  return out;
}

}  // namespace stgraph
