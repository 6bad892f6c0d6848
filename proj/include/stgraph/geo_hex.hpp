#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "stgraph/error.hpp"

namespace stgraph {

inline constexpr double kEarthRadiusKm = 6371.0088;  // IUGG mean radius

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;
};

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

inline double haversine_km(GeoPoint a, GeoPoint b) {
  const double phi1 = deg2rad(a.latitude), phi2 = deg2rad(b.latitude);
  const double dphi = phi2 - phi1;
  const double dlambda = deg2rad(b.longitude - a.longitude);
  const double s1 = std::sin(dphi / 2.0), s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::min(1.0, h);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

enum class IndexScheme : std::uint8_t { planar_hex };

// Cell identifier namespaced by index scheme and resolution, so ids from
// different indexes never compare equal.
struct CellId {
  IndexScheme scheme = IndexScheme::planar_hex;
  int resolution = 7;
  std::int64_t q = 0;
  std::int64_t r = 0;

  bool operator==(const CellId&) const = default;
  auto operator<=>(const CellId&) const = default;

  std::string to_string() const {
    return "hex" + std::to_string(resolution) + ":q=" + std::to_string(q) + ":r=" + std::to_string(r);
  }
};

class SpatialIndex {
public:
  virtual ~SpatialIndex() = default;
  virtual CellId cell_of(GeoPoint p) const = 0;
  // One-ring neighbours, excluding the cell itself; at most six.
  virtual std::vector<CellId> neighbors(const CellId& c) const = 0;
  virtual int resolution() const = 0;
};

struct PlanarPoint {
  double x = 0.0;  // km east
  double y = 0.0;  // km north
};

// Flat-topped hexagons in axial coordinates over an azimuthal-equidistant
// projection centred on `origin`. Resolution 7 cells have 5.16 km^2; each
// resolution step changes the area by a factor of 7.
class PlanarHexIndex final : public SpatialIndex {
public:
  static constexpr int kMinResolution = 4;
  static constexpr int kMaxResolution = 12;
  static constexpr double kResolution7AreaKm2 = 5.16;

  explicit PlanarHexIndex(GeoPoint origin, int resolution = 7) : origin_(origin), resolution_(resolution) {
    if (resolution < kMinResolution || resolution > kMaxResolution)
      throw ConfigError("unsupported hex resolution " + std::to_string(resolution) + " (supported 4..12)");
    if (!(origin.latitude >= -90 && origin.latitude <= 90 && origin.longitude >= -180 && origin.longitude <= 180))
      throw ConfigError("hex index origin out of range");
    const double area = cell_area_km2(resolution);
    size_ = std::sqrt(2.0 * area / (3.0 * std::sqrt(3.0)));
  }

  static double cell_area_km2(int resolution) { return kResolution7AreaKm2 * std::pow(7.0, 7 - resolution); }

  GeoPoint origin() const { return origin_; }
  int resolution() const override { return resolution_; }
  double circumradius_km() const { return size_; }

  PlanarPoint project(GeoPoint p) const {
    const double phi0 = deg2rad(origin_.latitude), phi = deg2rad(p.latitude);
    const double dl = deg2rad(p.longitude - origin_.longitude);
    const double cos_c = std::sin(phi0) * std::sin(phi) + std::cos(phi0) * std::cos(phi) * std::cos(dl);
    const double c = std::acos(std::clamp(cos_c, -1.0, 1.0));
    if (!std::isfinite(c) || std::numbers::pi - c < 1e-9)
      throw DataError("point cannot be projected (antipodal to index origin)");
    const double k = c < 1e-12 ? 1.0 : c / std::sin(c);
    return {kEarthRadiusKm * k * std::cos(phi) * std::sin(dl),
            kEarthRadiusKm * k * (std::cos(phi0) * std::sin(phi) - std::sin(phi0) * std::cos(phi) * std::cos(dl))};
  }

  CellId cell_of_planar(PlanarPoint p) const {
    const double fq = (2.0 / 3.0 * p.x) / size_;
    const double fr = (-1.0 / 3.0 * p.x + std::sqrt(3.0) / 3.0 * p.y) / size_;
    const double fs = -fq - fr;
    double rq = std::round(fq), rr = std::round(fr), rs = std::round(fs);
    const double dq = std::abs(rq - fq), dr = std::abs(rr - fr), ds = std::abs(rs - fs);
    if (dq > dr && dq > ds)
      rq = -rr - rs;
    else if (dr > ds)
      rr = -rq - rs;
    return {IndexScheme::planar_hex, resolution_, static_cast<std::int64_t>(rq), static_cast<std::int64_t>(rr)};
  }

  CellId cell_of(GeoPoint p) const override {
    if (!(std::isfinite(p.latitude) && std::isfinite(p.longitude)) || p.latitude < -90 || p.latitude > 90 ||
        p.longitude < -180 || p.longitude > 180)
      throw DataError("coordinates out of range");
    return cell_of_planar(project(p));
  }

  PlanarPoint center(const CellId& c) const {
    return {size_ * 1.5 * static_cast<double>(c.q),
            size_ * std::sqrt(3.0) * (static_cast<double>(c.r) + static_cast<double>(c.q) / 2.0)};
  }

  std::vector<CellId> neighbors(const CellId& c) const override {
    static constexpr std::int64_t dirs[6][2] = {{1, 0}, {1, -1}, {0, -1}, {-1, 0}, {-1, 1}, {0, 1}};
    std::vector<CellId> out;
    out.reserve(6);
    for (const auto& d : dirs) out.push_back({c.scheme, c.resolution, c.q + d[0], c.r + d[1]});
    return out;
  }

  // Hex grid distance in cells.
  static std::int64_t grid_distance(const CellId& a, const CellId& b) {
    const std::int64_t dq = a.q - b.q, dr = a.r - b.r;
    return (std::abs(dq) + std::abs(dr) + std::abs(dq + dr)) / 2;
  }

private:
  GeoPoint origin_;
  int resolution_;
  double size_ = 0.0;  // circumradius, km
};

}  // namespace stgraph
