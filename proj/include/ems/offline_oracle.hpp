#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ems/core.hpp"
#include "ems/errors.hpp"
#include "ems/offline.hpp"

namespace ems {

// Exhaustive full-information oracle: enumerates every assignment of
// emergencies to vehicles, every interleaving mode and every redeployment
// choice, timing each candidate with core::respond. Kept independent of
// the digraph solver so it can certify it. Refuses instances above the
// size cap.
inline OfflineSolution brute_force_offline(const ScenarioConfig& scenario,
                                           std::vector<Request> requests,
                                           std::vector<AmbulanceInit> fleet = {}) {
  scenario.validate();
  sort_requests(requests);
  if (fleet.empty()) {
    const auto init = scenario.resolved_initial_locations();
    for (int i = 0; i < scenario.fleet_size; ++i) {
      fleet.push_back(AmbulanceInit{i, init[static_cast<std::size_t>(i)]});
    }
  }
  if (fleet.size() > 3 || requests.size() > 4 ||
      scenario.waiting_locations.size() > 2) {
    throw InputError("brute_force_offline: instance above size cap");
  }

  const int n = static_cast<int>(requests.size());
  const int n_amb = static_cast<int>(fleet.size());
  const int n_w = static_cast<int>(scenario.waiting_locations.size());

  struct Frontier {
    int kind = 0;  // 0 at start, 1 after an emergency
    int last = -1;
    double completion = 0.0;
    Location at{};
  };

  std::vector<Frontier> fr(static_cast<std::size_t>(n_amb));
  for (int m = 0; m < n_amb; ++m) {
    fr[static_cast<std::size_t>(m)].completion =
        fleet[static_cast<std::size_t>(m)].release_s;
    fr[static_cast<std::size_t>(m)].at = fleet[static_cast<std::size_t>(m)].loc;
  }

  std::vector<std::uint16_t> seq;
  std::optional<double> best_cost;
  std::vector<std::uint16_t> best_seq;

  // elapsed response of requests[j] via (vehicle m, mode); < 0 if unusable
  auto try_connection = [&](const Frontier& f, int m, int j,
                            int mode) -> double {
    const Request& r = requests[static_cast<std::size_t>(j)];
    if (mode == 0) {
      if (f.kind != 0) return -1.0;
      if (fleet[static_cast<std::size_t>(m)].must_redeploy &&
          r.entry_s > fleet[static_cast<std::size_t>(m)].release_s) {
        return -1.0;
      }
      const Arrival a = respond(f.completion, f.at, r, scenario.speed_kmh);
      return a.response_s - r.entry_s;
    }
    if (mode >= 1 && mode <= n_w) {
      double e_park = 0.0;
      if (f.kind == 0) {
        if (!fleet[static_cast<std::size_t>(m)].must_redeploy) return -1.0;
        e_park = fleet[static_cast<std::size_t>(m)].release_s;
      } else {
        const Request& prev = requests[static_cast<std::size_t>(f.last)];
        e_park = prev.entry_s + prev.service_s;
      }
      if (!(e_park < r.entry_s)) return -1.0;
      Request park;
      park.kind = RequestKind::Redeployment;
      park.origin = park.dropoff =
          scenario.waiting_locations[static_cast<std::size_t>(mode - 1)];
      park.entry_s = e_park;
      const Arrival at_w = respond(f.completion, f.at, park, scenario.speed_kmh);
      const Arrival a =
          respond(at_w.completion_s, park.origin, r, scenario.speed_kmh);
      return a.response_s - r.entry_s;
    }
    if (mode == n_w + 1) {
      if (f.kind != 1) return -1.0;
      const Request& prev = requests[static_cast<std::size_t>(f.last)];
      if (!(prev.entry_s < r.entry_s)) return -1.0;
      if (f.completion < r.entry_s) return -1.0;
      const Arrival a = respond(f.completion, f.at, r, scenario.speed_kmh);
      return a.response_s - r.entry_s;
    }
    return -1.0;
  };

  // depth-first over the time-ordered emergencies, canonical child order
  auto recurse = [&](auto&& self, int j, double cost) -> void {
    if (j == n) {
      if (!best_cost.has_value() || cost < *best_cost ||
          (cost == *best_cost && seq < best_seq)) {
        best_cost = cost;
        best_seq = seq;
      }
      return;
    }
    const Request& r = requests[static_cast<std::size_t>(j)];
    for (int m = 0; m < n_amb; ++m) {
      for (int mode = 0; mode <= n_w + 1; ++mode) {
        const double elapsed =
            try_connection(fr[static_cast<std::size_t>(m)], m, j, mode);
        if (elapsed < 0.0) continue;
        const Frontier saved = fr[static_cast<std::size_t>(m)];
        auto& f = fr[static_cast<std::size_t>(m)];
        f.kind = 1;
        f.last = j;
        f.completion = r.entry_s + elapsed + r.service_s;
        f.at = r.dropoff;
        seq.push_back(offline_detail::choice_code(m, mode, n_w));
        self(self, j + 1, cost + elapsed);
        seq.pop_back();
        fr[static_cast<std::size_t>(m)] = saved;
      }
    }
  };
  recurse(recurse, 0, 0.0);

  if (!best_cost.has_value()) {
    throw InfeasibleError("brute_force_offline: no feasible schedule");
  }

  // materialize the winning schedule
  OfflineSolution sol;
  sol.objective = *best_cost;
  sol.emergency_elapsed_s.assign(static_cast<std::size_t>(n), -1.0);
  sol.plans.resize(static_cast<std::size_t>(n_amb));
  for (int m = 0; m < n_amb; ++m) {
    sol.plans[static_cast<std::size_t>(m)].ambulance_id =
        fleet[static_cast<std::size_t>(m)].id;
    auto& f = fr[static_cast<std::size_t>(m)];
    f = Frontier{};
    f.completion = fleet[static_cast<std::size_t>(m)].release_s;
    f.at = fleet[static_cast<std::size_t>(m)].loc;
  }
  for (int j = 0; j < n; ++j) {
    const std::uint16_t code = best_seq[static_cast<std::size_t>(j)];
    const int m = code / (n_w + 2);
    const int mode = code % (n_w + 2);
    const Request& r = requests[static_cast<std::size_t>(j)];
    const double elapsed =
        try_connection(fr[static_cast<std::size_t>(m)], m, j, mode);
    auto& plan = sol.plans[static_cast<std::size_t>(m)];
    if (mode >= 1 && mode <= n_w) {
      plan.steps.push_back(PlanStep{PlanStep::Kind::Redeploy, 0, mode - 1});
    }
    plan.steps.push_back(PlanStep{PlanStep::Kind::Serve, r.id, -1});
    sol.emergency_elapsed_s[static_cast<std::size_t>(j)] = elapsed;
    auto& f = fr[static_cast<std::size_t>(m)];
    f.kind = 1;
    f.last = j;
    f.completion = r.entry_s + elapsed + r.service_s;
    f.at = r.dropoff;
  }
  for (int m = 0; m < n_amb; ++m) {
    auto& plan = sol.plans[static_cast<std::size_t>(m)];
    const auto& f = fr[static_cast<std::size_t>(m)];
    if (f.kind == 1 ||
        (f.kind == 0 && fleet[static_cast<std::size_t>(m)].must_redeploy)) {
      plan.steps.push_back(PlanStep{PlanStep::Kind::Redeploy, 0, 0});
    }
  }
  return sol;
}

}  // namespace ems
