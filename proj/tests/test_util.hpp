#pragma once

#include <random>
#include <vector>

#include "ems/core.hpp"

namespace ems::testutil {

inline ScenarioConfig random_scenario(std::mt19937_64& rng, int fleet,
                                      int n_wait, double horizon_s = 4 * 3600.0) {
  std::uniform_real_distribution<double> lat(37.68, 37.82);
  std::uniform_real_distribution<double> lon(-122.52, -122.36);
  ScenarioConfig s;
  s.fleet_size = fleet;
  s.horizon_s = horizon_s;
  s.speed_kmh = 30.0;
  for (int w = 0; w < n_wait; ++w) {
    s.waiting_locations.push_back(Location{lat(rng), lon(rng)});
  }
  for (int m = 0; m < fleet; ++m) {
    s.initial_locations.push_back(Location{lat(rng), lon(rng)});
  }
  return s;
}

inline std::vector<Request> random_emergencies(std::mt19937_64& rng, int n,
                                               double horizon_s) {
  std::uniform_real_distribution<double> lat(37.68, 37.82);
  std::uniform_real_distribution<double> lon(-122.52, -122.36);
  std::uniform_real_distribution<double> entry(0.0, horizon_s);
  std::uniform_real_distribution<double> service(120.0, 1500.0);
  std::bernoulli_distribution transported(0.4);
  std::vector<Request> out;
  for (int i = 0; i < n; ++i) {
    Request r;
    r.id = i;
    r.kind = RequestKind::Emergency;
    r.origin = Location{lat(rng), lon(rng)};
    r.dropoff = transported(rng) ? Location{lat(rng), lon(rng)} : r.origin;
    r.entry_s = entry(rng);
    r.service_s = service(rng);
    out.push_back(std::move(r));
  }
  sort_requests(out);
  return out;
}

}  // namespace ems::testutil
