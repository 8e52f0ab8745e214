#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "ems/core.hpp"
#include "ems/errors.hpp"
#include "ems/geo.hpp"
#include "ems/simulator.hpp"

namespace ems {

// Historical demand summary the edge features draw on: hex cells with
// their call rates, plus the coverage radius used for reachability counts.
struct FeatureContext {
  HexGrid grid;
  std::vector<Location> cell_centers;
  std::vector<double> cell_rates_per_h;
  std::unordered_map<HexCell, double, HexCellHash> rate_by_cell;
  double coverage_radius_s = 600.0;

  bool empty() const { return cell_centers.empty(); }
};

/// Bins a call history into hex cells and derives per-cell demand rates.
inline FeatureContext build_feature_context(
    const std::vector<Request>& history, const ScenarioConfig& scenario,
    double observed_hours, double cell_area_km2 = 0.737,
    double coverage_radius_s = 600.0) {
  if (history.empty()) {
    throw InputError("feature context: empty call history");
  }
  if (!(observed_hours > 0.0)) {
    throw InputError("feature context: nonpositive observation window");
  }
  double lat = 0.0, lon = 0.0;
  for (const auto& r : history) {
    lat += r.origin.lat;
    lon += r.origin.lon;
  }
  FeatureContext ctx;
  ctx.grid = HexGrid::for_cell_area(
      Location{lat / static_cast<double>(history.size()),
               lon / static_cast<double>(history.size())},
      cell_area_km2);
  ctx.coverage_radius_s = coverage_radius_s;
  std::unordered_map<HexCell, std::size_t, HexCellHash> counts;
  for (const auto& r : history) counts[ctx.grid.cell_of(r.origin)]++;
  for (const auto& [cell, count] : counts) {
    const double rate = static_cast<double>(count) / observed_hours;
    ctx.rate_by_cell[cell] = rate;
    ctx.cell_centers.push_back(ctx.grid.center_of(cell));
    ctx.cell_rates_per_h.push_back(rate);
  }
  (void)scenario;
  return ctx;
}

inline constexpr int kFeatureCount = 9;

/// Feature row of one decision edge, fixed order:
///   0 travel time from the vehicle to the target origin (s)
///   1 redeployment indicator
///   2 time-of-day sin, 3 time-of-day cos
///   4 other idle vehicles within the coverage radius of the target origin
///   5 demand rate of the destination cell (calls/h)
///   6 demand cells near the destination still covered by another idle vehicle
///   7 queue length
///   8 minutes since this vehicle last freed
inline std::array<double, kFeatureCount> edge_features(
    const ScenarioConfig& scenario, const SystemState& x, const Action& edge,
    const FeatureContext& ctx) {
  if (ctx.empty()) {
    throw InputError("edge_features: missing context stats");
  }
  const auto& amb = x.ambulance(edge.ambulance_id);
  const Location from = amb.location_when_free();
  std::array<double, kFeatureCount> f{};

  f[0] = scenario.travel_s(from, edge.target.origin);
  f[1] = edge.target.kind == RequestKind::Redeployment ? 1.0 : 0.0;

  const double tod = std::fmod(x.clock + scenario.day_anchor_s, 86400.0);
  const double phase = 2.0 * kPi * tod / 86400.0;
  f[2] = std::sin(phase);
  f[3] = std::cos(phase);

  int near_idle = 0;
  for (const auto& a : x.ambulances) {
    if (a.id == edge.ambulance_id || !a.idle_at(x.clock)) continue;
    if (scenario.travel_s(a.location_when_free(), edge.target.origin) <=
        ctx.coverage_radius_s) {
      ++near_idle;
    }
  }
  f[4] = static_cast<double>(near_idle);

  const HexCell dest_cell = ctx.grid.cell_of(edge.target.dropoff);
  const auto it = ctx.rate_by_cell.find(dest_cell);
  f[5] = it == ctx.rate_by_cell.end() ? 0.0 : it->second;

  int covered = 0;
  for (const auto& center : ctx.cell_centers) {
    if (scenario.travel_s(edge.target.dropoff, center) >
        ctx.coverage_radius_s) {
      continue;
    }
    for (const auto& a : x.ambulances) {
      if (a.id == edge.ambulance_id || !a.idle_at(x.clock)) continue;
      if (scenario.travel_s(a.location_when_free(), center) <=
          ctx.coverage_radius_s) {
        ++covered;
        break;
      }
    }
  }
  f[6] = static_cast<double>(covered);

  f[7] = static_cast<double>(x.fifo.size());
  f[8] = std::max(x.clock - amb.free_at(), 0.0) / 60.0;
  return f;
}

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline FeatureStats compute_feature_stats(
    const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InputError("feature stats: no rows");
  const std::size_t dim = rows.front().size();
  FeatureStats s;
  s.mean.assign(dim, 0.0);
  s.stddev.assign(dim, 0.0);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < dim; ++k) s.mean[k] += r[k];
  }
  for (std::size_t k = 0; k < dim; ++k) {
    s.mean[k] /= static_cast<double>(rows.size());
  }
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = r[k] - s.mean[k];
      s.stddev[k] += d * d;
    }
  }
  for (std::size_t k = 0; k < dim; ++k) {
    s.stddev[k] = std::sqrt(s.stddev[k] / static_cast<double>(rows.size()));
    if (s.stddev[k] < 1e-12) s.stddev[k] = 1.0;  // constant feature
  }
  return s;
}

struct CorrelationFilterResult {
  std::vector<int> kept;
  std::vector<int> zero_variance;  // kept but flagged
};

/// Greedily drops the later column of any pair whose |Pearson r| exceeds
/// the threshold. Zero-variance columns are retained and flagged.
inline CorrelationFilterResult correlation_filter(
    const std::vector<std::vector<double>>& rows, double threshold = 0.80) {
  if (rows.size() < 2) {
    throw InputError("correlation_filter: need at least two samples");
  }
  const std::size_t dim = rows.front().size();
  const double n = static_cast<double>(rows.size());
  std::vector<double> mean(dim, 0.0), var(dim, 0.0);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < dim; ++k) mean[k] += r[k];
  }
  for (auto& m : mean) m /= n;
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = r[k] - mean[k];
      var[k] += d * d;
    }
  }
  CorrelationFilterResult out;
  for (std::size_t j = 0; j < dim; ++j) {
    if (var[j] <= 0.0) {
      out.zero_variance.push_back(static_cast<int>(j));
      out.kept.push_back(static_cast<int>(j));
      continue;
    }
    bool drop = false;
    for (int i : out.kept) {
      const std::size_t ii = static_cast<std::size_t>(i);
      if (var[ii] <= 0.0) continue;
      double cov = 0.0;
      for (const auto& r : rows) {
        cov += (r[ii] - mean[ii]) * (r[j] - mean[j]);
      }
      const double corr = cov / std::sqrt(var[ii] * var[j]);
      if (std::fabs(corr) > threshold) {
        drop = true;
        break;
      }
    }
    if (!drop) out.kept.push_back(static_cast<int>(j));
  }
  return out;
}

}  // namespace ems
