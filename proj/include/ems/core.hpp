#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ems/errors.hpp"
#include "ems/geo.hpp"

namespace ems {

enum class RequestKind { Emergency, Redeployment };

inline const char* to_string(RequestKind k) {
  return k == RequestKind::Emergency ? "emergency" : "redeployment";
}

// An emergency call or a redeployment option. Redeployments have zero
// service time and origin == dropoff == the waiting location.
struct Request {
  std::int64_t id = 0;
  RequestKind kind = RequestKind::Emergency;
  Location origin{};
  double entry_s = 0.0;
  Location dropoff{};
  double service_s = 0.0;
};

/// Slack between two successive requests: e_2 - e_1 - s_1. May be negative.
inline double slack_s(const Request& r, const Request& r2) {
  return r2.entry_s - r.entry_s - r.service_s;
}

struct Arrival {
  double response_s = 0.0;    // absolute clock time of scene arrival
  double completion_s = 0.0;  // response + service
};

/// Chains a request after a completed one: the ambulance departs from
/// `prev_dropoff` no earlier than max(prev_completion, entry of next).
inline Arrival respond(double prev_completion_s, const Location& prev_dropoff,
                       const Request& next, double speed_kmh) {
  if (prev_completion_s < 0.0) {
    throw InputError("respond: negative completion time");
  }
  const double tau = travel_time_s(prev_dropoff, next.origin, speed_kmh);
  Arrival a;
  a.response_s = std::max(prev_completion_s, next.entry_s) + tau;
  a.completion_s = a.response_s + next.service_s;
  return a;
}

// One served request on an ambulance's schedule. `depart_s` is when the
// vehicle starts driving (response - travel); `dispatch_s` the decision
// epoch that committed it.
struct ScheduleEntry {
  std::int64_t request_id = 0;
  RequestKind kind = RequestKind::Emergency;
  double entry_s = 0.0;
  double dispatch_s = 0.0;
  double depart_s = 0.0;
  double response_s = 0.0;
  double completion_s = 0.0;
  Location origin{};
  Location dropoff{};

  double elapsed_response_s() const { return response_s - entry_s; }
};

struct AmbulanceState {
  int id = 0;
  Location initial{};
  std::vector<ScheduleEntry> schedule;

  double free_at() const {
    return schedule.empty() ? 0.0 : schedule.back().completion_s;
  }
  Location location_when_free() const {
    return schedule.empty() ? initial : schedule.back().dropoff;
  }
  bool idle_at(double t) const { return free_at() <= t; }
};

struct ScenarioConfig {
  int fleet_size = 1;
  std::vector<Location> waiting_locations;  // redeployment targets, id = index
  std::vector<Location> hospitals;
  double horizon_s = 6.0 * 3600.0;
  double warmup_s = 0.0;
  double cooldown_s = 0.0;
  double speed_kmh = 30.0;
  double day_anchor_s = 0.0;  // seconds past midnight at episode clock 0
  // Starting positions; round-robin over waiting locations when empty.
  std::vector<Location> initial_locations;

  void validate() const {
    if (fleet_size < 1) throw InputError("scenario: fleet_size must be >= 1");
    if (waiting_locations.empty()) {
      throw InputError("scenario: at least one waiting location required");
    }
    if (warmup_s < 0.0 || cooldown_s < 0.0 ||
        horizon_s <= warmup_s + cooldown_s) {
      throw InputError("scenario: need horizon > warmup + cooldown >= 0");
    }
    if (!(speed_kmh > 0.0)) throw InputError("scenario: speed must be > 0");
    for (const auto& l : waiting_locations) {
      if (!location_valid(l)) throw InputError("scenario: bad waiting location");
    }
    for (const auto& l : hospitals) {
      if (!location_valid(l)) throw InputError("scenario: bad hospital");
    }
  }

  std::vector<Location> resolved_initial_locations() const {
    if (!initial_locations.empty()) {
      if (static_cast<int>(initial_locations.size()) != fleet_size) {
        throw InputError("scenario: initial_locations size != fleet_size");
      }
      return initial_locations;
    }
    std::vector<Location> out;
    out.reserve(static_cast<std::size_t>(fleet_size));
    for (int i = 0; i < fleet_size; ++i) {
      out.push_back(waiting_locations[static_cast<std::size_t>(i) %
                                      waiting_locations.size()]);
    }
    return out;
  }

  double travel_s(const Location& a, const Location& b) const {
    return travel_time_s(a, b, speed_kmh);
  }
};

/// Mean elapsed response (wait + travel, relative to call entry) over the
/// emergency entries of the given schedules. Redeployments are excluded.
inline double mean_response_time_s(const std::vector<AmbulanceState>& fleet) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& amb : fleet) {
    for (const auto& e : amb.schedule) {
      if (e.kind == RequestKind::Emergency) {
        sum += e.elapsed_response_s();
        ++n;
      }
    }
  }
  if (n == 0) {
    throw MetricError("mean_response_time: no emergency requests served");
  }
  return sum / static_cast<double>(n);
}

/// Stable request ordering: by entry time, ties by id.
inline void sort_requests(std::vector<Request>& rs) {
  std::sort(rs.begin(), rs.end(), [](const Request& a, const Request& b) {
    if (a.entry_s != b.entry_s) return a.entry_s < b.entry_s;
    return a.id < b.id;
  });
}

}  // namespace ems
