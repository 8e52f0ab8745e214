#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>

#include "ems/errors.hpp"

namespace ems {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kPi = 3.14159265358979323846;

struct Location {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]

  friend bool operator==(const Location& a, const Location& b) {
    return a.lat == b.lat && a.lon == b.lon;
  }
};

inline bool location_valid(const Location& l) {
  return std::isfinite(l.lat) && std::isfinite(l.lon) && l.lat >= -90.0 &&
         l.lat <= 90.0 && l.lon >= -180.0 && l.lon <= 180.0;
}

inline double deg2rad(double deg) { return deg * kPi / 180.0; }

inline double haversine_km(const Location& a, const Location& b) {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = deg2rad(b.lat - a.lat);
  const double dlmb = deg2rad(b.lon - a.lon);
  const double s = std::sin(dphi / 2.0) * std::sin(dphi / 2.0) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlmb / 2.0) *
                       std::sin(dlmb / 2.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

/// Driving time in seconds between two points at a constant velocity.
inline double travel_time_s(const Location& a, const Location& b,
                            double speed_kmh) {
  if (!std::isfinite(a.lat) || !std::isfinite(a.lon) ||
      !std::isfinite(b.lat) || !std::isfinite(b.lon)) {
    throw InputError("travel_time_s: non-finite coordinates");
  }
  if (!(speed_kmh > 0.0)) {
    throw InputError("travel_time_s: speed must be positive");
  }
  return haversine_km(a, b) / speed_kmh * 3600.0;
}

struct HexCell {
  std::int64_t q = 0;
  std::int64_t r = 0;

  friend bool operator==(const HexCell& a, const HexCell& b) {
    return a.q == b.q && a.r == b.r;
  }
};

struct HexCellHash {
  std::size_t operator()(const HexCell& c) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    mix(static_cast<std::uint64_t>(c.q));
    mix(static_cast<std::uint64_t>(c.r));
    return static_cast<std::size_t>(h);
  }
};

// Pointy-top axial hex grid over a local equirectangular projection
// anchored at `origin`. Adequate at metro scale; cells are indexed by
// axial coordinates and carry back-projected centers.
class HexGrid {
 public:
  HexGrid() = default;
  HexGrid(Location origin, double edge_km) : origin_(origin), edge_km_(edge_km) {
    if (!(edge_km > 0.0)) throw InputError("HexGrid: edge must be positive");
    cos_lat0_ = std::cos(deg2rad(origin.lat));
  }

  /// Grid whose cells have the requested area (km^2).
  static HexGrid for_cell_area(Location origin, double area_km2) {
    if (!(area_km2 > 0.0)) throw InputError("HexGrid: area must be positive");
    // area = 3*sqrt(3)/2 * edge^2
    const double edge = std::sqrt(2.0 * area_km2 / (3.0 * std::sqrt(3.0)));
    return HexGrid(origin, edge);
  }

  double edge_km() const { return edge_km_; }
  Location origin() const { return origin_; }

  HexCell cell_of(const Location& l) const {
    const auto [x, y] = project(l);
    const double qf = (std::sqrt(3.0) / 3.0 * x - 1.0 / 3.0 * y) / edge_km_;
    const double rf = (2.0 / 3.0 * y) / edge_km_;
    return round_axial(qf, rf);
  }

  Location center_of(const HexCell& c) const {
    const double x =
        edge_km_ * (std::sqrt(3.0) * static_cast<double>(c.q) +
                    std::sqrt(3.0) / 2.0 * static_cast<double>(c.r));
    const double y = edge_km_ * (3.0 / 2.0 * static_cast<double>(c.r));
    return unproject(x, y);
  }

 private:
  std::pair<double, double> project(const Location& l) const {
    const double x = kEarthRadiusKm * cos_lat0_ * deg2rad(l.lon - origin_.lon);
    const double y = kEarthRadiusKm * deg2rad(l.lat - origin_.lat);
    return {x, y};
  }

  Location unproject(double x, double y) const {
    Location l;
    l.lat = origin_.lat + y / kEarthRadiusKm * 180.0 / kPi;
    l.lon = origin_.lon + x / (kEarthRadiusKm * cos_lat0_) * 180.0 / kPi;
    return l;
  }

  static HexCell round_axial(double qf, double rf) {
    // cube rounding
    const double xf = qf, zf = rf, yf = -xf - zf;
    double rx = std::round(xf), ry = std::round(yf), rz = std::round(zf);
    const double dx = std::fabs(rx - xf), dy = std::fabs(ry - yf),
                 dz = std::fabs(rz - zf);
    if (dx > dy && dx > dz) {
      rx = -ry - rz;
    } else if (dy > dz) {
      ry = -rx - rz;
    } else {
      rz = -rx - ry;
    }
    (void)ry;
    return HexCell{static_cast<std::int64_t>(rx), static_cast<std::int64_t>(rz)};
  }

  Location origin_{};
  double edge_km_ = 1.0;
  double cos_lat0_ = 1.0;
};

}  // namespace ems
