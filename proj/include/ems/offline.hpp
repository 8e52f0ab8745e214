#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "ems/core.hpp"
#include "ems/errors.hpp"

namespace ems {

// Ambulance boundary condition for an offline instance: where the vehicle
// is (or will be) available, from when, and whether its first move must be
// a redeployment (it is standing at a drop-off).
struct AmbulanceInit {
  int id = 0;
  Location loc{};
  double release_s = 0.0;
  bool must_redeploy = false;
};

enum class VertexKind { Source, Sink, Ambulance, Emergency, Redeploy };

struct DigraphVertex {
  VertexKind kind = VertexKind::Source;
  int ambulance_id = -1;        // Ambulance, or ambulance-spawned Redeploy
  std::int64_t request_id = 0;  // Emergency, or the parent of a Redeploy
  int emergency_index = -1;     // position in the time-sorted emergency list
  int waiting_index = -1;       // Redeploy
  double entry_s = 0.0;
  double service_s = 0.0;
  Location at_in{};   // where an ambulance arrives to serve this vertex
  Location at_out{};  // where it departs from afterwards
};

struct DigraphArc {
  int from = 0;
  int to = 0;
  double tau_s = 0.0;
  double slack_s = 0.0;
  bool conditional = false;  // emergency->emergency, usable iff c_from >= e_to
};

// Acyclic dispatching digraph. Every set of |M| vertex-disjoint
// source->sink paths is a feasible full-information schedule.
struct DispatchDigraph {
  std::vector<DigraphVertex> vertices;
  std::vector<DigraphArc> arcs;
  int source = -1;
  int sink = -1;
  std::vector<int> ambulance_vertices;  // ambulance id order
  std::vector<int> emergency_vertices;  // entry-time order
  std::vector<Request> emergencies;     // entry-time order
  std::vector<AmbulanceInit> fleet;
  int n_waiting = 0;
  double speed_kmh = 30.0;
  double big_m = 0.0;  // horizon + max travel, the beta upper bound

  int n_emergencies() const { return static_cast<int>(emergencies.size()); }
};

/// Builds the dispatching digraph from time-sorted requests. Optional
/// per-ambulance boundary conditions support residual (mid-episode)
/// instances; the default places each vehicle idle at its initial
/// location from time zero.
inline DispatchDigraph build_digraph(
    const ScenarioConfig& scenario, std::vector<Request> requests,
    std::vector<AmbulanceInit> fleet = {}) {
  scenario.validate();
  sort_requests(requests);
  for (const auto& r : requests) {
    if (r.kind != RequestKind::Emergency) {
      throw InputError("build_digraph: stream must contain only emergencies");
    }
  }
  if (fleet.empty()) {
    const auto init = scenario.resolved_initial_locations();
    for (int i = 0; i < scenario.fleet_size; ++i) {
      fleet.push_back(AmbulanceInit{i, init[static_cast<std::size_t>(i)]});
    }
  }

  DispatchDigraph g;
  g.emergencies = requests;
  g.fleet = fleet;
  g.n_waiting = static_cast<int>(scenario.waiting_locations.size());
  g.speed_kmh = scenario.speed_kmh;

  auto add_vertex = [&g](DigraphVertex v) {
    g.vertices.push_back(std::move(v));
    return static_cast<int>(g.vertices.size()) - 1;
  };
  g.source = add_vertex({VertexKind::Source});
  g.sink = add_vertex({VertexKind::Sink});

  for (const auto& a : fleet) {
    DigraphVertex v;
    v.kind = VertexKind::Ambulance;
    v.ambulance_id = a.id;
    v.entry_s = a.release_s;
    v.at_in = v.at_out = a.loc;
    g.ambulance_vertices.push_back(add_vertex(std::move(v)));
  }
  for (int j = 0; j < g.n_emergencies(); ++j) {
    const Request& r = g.emergencies[static_cast<std::size_t>(j)];
    DigraphVertex v;
    v.kind = VertexKind::Emergency;
    v.request_id = r.id;
    v.emergency_index = j;
    v.entry_s = r.entry_s;
    v.service_s = r.service_s;
    v.at_in = r.origin;
    v.at_out = r.dropoff;
    g.emergency_vertices.push_back(add_vertex(std::move(v)));
  }
  // redeployment options: per drop-off-bound ambulance, then per emergency
  std::vector<std::vector<int>> amb_redeploys(fleet.size());
  for (std::size_t m = 0; m < fleet.size(); ++m) {
    if (!fleet[m].must_redeploy) continue;
    for (int w = 0; w < g.n_waiting; ++w) {
      DigraphVertex v;
      v.kind = VertexKind::Redeploy;
      v.ambulance_id = fleet[m].id;
      v.waiting_index = w;
      v.entry_s = fleet[m].release_s;
      v.at_in = v.at_out = scenario.waiting_locations[static_cast<std::size_t>(w)];
      amb_redeploys[m].push_back(add_vertex(std::move(v)));
    }
  }
  std::vector<std::vector<int>> emg_redeploys(
      static_cast<std::size_t>(g.n_emergencies()));
  for (int j = 0; j < g.n_emergencies(); ++j) {
    const Request& r = g.emergencies[static_cast<std::size_t>(j)];
    for (int w = 0; w < g.n_waiting; ++w) {
      DigraphVertex v;
      v.kind = VertexKind::Redeploy;
      v.request_id = r.id;
      v.emergency_index = j;
      v.waiting_index = w;
      v.entry_s = r.entry_s + r.service_s;
      v.at_in = v.at_out = scenario.waiting_locations[static_cast<std::size_t>(w)];
      emg_redeploys[static_cast<std::size_t>(j)].push_back(add_vertex(std::move(v)));
    }
  }

  auto tau = [&](int from, int to) {
    return travel_time_s(g.vertices[static_cast<std::size_t>(from)].at_out,
                         g.vertices[static_cast<std::size_t>(to)].at_in,
                         scenario.speed_kmh);
  };
  auto add_arc = [&](int from, int to, bool conditional = false) {
    const auto& vf = g.vertices[static_cast<std::size_t>(from)];
    const auto& vt = g.vertices[static_cast<std::size_t>(to)];
    DigraphArc a;
    a.from = from;
    a.to = to;
    a.conditional = conditional;
    const bool terminal = vf.kind == VertexKind::Source ||
                          vt.kind == VertexKind::Sink;
    a.tau_s = terminal ? 0.0 : tau(from, to);
    a.slack_s = terminal ? 0.0 : vt.entry_s - vf.entry_s - vf.service_s;
    g.arcs.push_back(a);
  };

  // 1. source -> ambulances
  for (int mv : g.ambulance_vertices) add_arc(g.source, mv);
  // 2. ambulances -> emergencies (drop-off-bound vehicles only to requests
  //    already waiting at their release)
  for (std::size_t m = 0; m < fleet.size(); ++m) {
    for (int j = 0; j < g.n_emergencies(); ++j) {
      if (fleet[m].must_redeploy &&
          g.emergencies[static_cast<std::size_t>(j)].entry_s >
              fleet[m].release_s) {
        continue;
      }
      add_arc(g.ambulance_vertices[m],
              g.emergency_vertices[static_cast<std::size_t>(j)]);
    }
  }
  // 2b. drop-off-bound ambulances -> their redeployment options
  for (std::size_t m = 0; m < fleet.size(); ++m) {
    for (int rv : amb_redeploys[m]) add_arc(g.ambulance_vertices[m], rv);
  }
  // 3. emergencies -> their redeployment options
  for (int j = 0; j < g.n_emergencies(); ++j) {
    for (int rv : emg_redeploys[static_cast<std::size_t>(j)]) {
      add_arc(g.emergency_vertices[static_cast<std::size_t>(j)], rv);
    }
  }
  // 4. redeployment options -> strictly later emergencies
  auto link_redeploys = [&](const std::vector<int>& rvs) {
    for (int rv : rvs) {
      for (int j = 0; j < g.n_emergencies(); ++j) {
        if (g.vertices[static_cast<std::size_t>(rv)].entry_s <
            g.emergencies[static_cast<std::size_t>(j)].entry_s) {
          add_arc(rv, g.emergency_vertices[static_cast<std::size_t>(j)]);
        }
      }
    }
  };
  for (std::size_t m = 0; m < fleet.size(); ++m) link_redeploys(amb_redeploys[m]);
  for (int j = 0; j < g.n_emergencies(); ++j) {
    link_redeploys(emg_redeploys[static_cast<std::size_t>(j)]);
  }
  // 5. conditional direct dispatches between successive emergencies
  for (int j = 0; j < g.n_emergencies(); ++j) {
    for (int j2 = j + 1; j2 < g.n_emergencies(); ++j2) {
      if (g.emergencies[static_cast<std::size_t>(j)].entry_s <
          g.emergencies[static_cast<std::size_t>(j2)].entry_s) {
        add_arc(g.emergency_vertices[static_cast<std::size_t>(j)],
                g.emergency_vertices[static_cast<std::size_t>(j2)], true);
      }
    }
  }
  // 6. redeployment and ambulance vertices -> sink (a vehicle that must
  //    leave its drop-off cannot settle there)
  for (std::size_t m = 0; m < fleet.size(); ++m) {
    if (!fleet[m].must_redeploy) add_arc(g.ambulance_vertices[m], g.sink);
  }
  for (std::size_t m = 0; m < fleet.size(); ++m) {
    for (int rv : amb_redeploys[m]) add_arc(rv, g.sink);
  }
  for (int j = 0; j < g.n_emergencies(); ++j) {
    for (int rv : emg_redeploys[static_cast<std::size_t>(j)]) {
      add_arc(rv, g.sink);
    }
  }

  double max_tau = 0.0;
  for (const auto& a : g.arcs) max_tau = std::max(max_tau, a.tau_s);
  g.big_m = scenario.horizon_s + max_tau;
  return g;
}

// One ambulance's planned itinerary: serve requests and park in between.
struct PlanStep {
  enum class Kind { Serve, Redeploy } kind = Kind::Serve;
  std::int64_t request_id = 0;  // Serve
  int waiting_index = -1;       // Redeploy
};

struct AmbulancePlan {
  int ambulance_id = 0;
  std::vector<PlanStep> steps;
};

struct SolveStats {
  std::size_t nodes_expanded = 0;
  std::size_t nodes_pushed = 0;
  double wall_ms = 0.0;
};

struct OfflineSolution {
  std::vector<char> x;          // selected arc flags
  std::vector<double> alpha;    // per-arc response terms
  std::vector<double> beta;     // per-arc delays
  double objective = 0.0;       // hard: sum of elapsed responses (s)
  std::vector<AmbulancePlan> plans;
  std::vector<double> emergency_elapsed_s;  // per emergency, time order
  std::vector<std::int64_t> dropped;        // soft mode only
  bool soft = false;
  double gamma = 0.0;
  SolveStats stats;
};

namespace offline_detail {

struct Frontier {
  // kind 0: at the start vertex; kind 1: just served emergency `last`
  int kind = 0;
  int last = -1;
  double completion = 0.0;
  Location at{};
};

struct Tables {
  int n_emg = 0, n_amb = 0, n_w = 0;
  std::vector<int> amb_emg;     // [m][j] arc id or -1
  std::vector<int> amb_w;       // [m][w] arc id or -1 (must_redeploy only)
  std::vector<int> emg_w;       // [j][w] arc id or -1
  std::vector<int> ambw_emg;    // [m][w][j] arc id or -1
  std::vector<int> emgw_emg;    // [j][w][j2] arc id or -1
  std::vector<int> emg_emg;     // [j][j2] arc id or -1
  std::vector<int> amb_sink;    // [m]
  std::vector<int> ambw_sink;   // [m][w]
  std::vector<int> emgw_sink;   // [j][w]
  std::vector<int> source_amb;  // [m]
  std::vector<int> ambw_vertex; // [m][w] vertex id or -1
  std::vector<int> emgw_vertex; // [j][w] vertex id or -1

  int& at(std::vector<int>& v, int a, int b, int dim_b) {
    return v[static_cast<std::size_t>(a) * static_cast<std::size_t>(dim_b) +
             static_cast<std::size_t>(b)];
  }
  int get(const std::vector<int>& v, int a, int b, int dim_b) const {
    return v[static_cast<std::size_t>(a) * static_cast<std::size_t>(dim_b) +
             static_cast<std::size_t>(b)];
  }
  int get3(const std::vector<int>& v, int a, int b, int c, int db, int dc) const {
    return v[(static_cast<std::size_t>(a) * static_cast<std::size_t>(db) +
              static_cast<std::size_t>(b)) *
                 static_cast<std::size_t>(dc) +
             static_cast<std::size_t>(c)];
  }
};

inline Tables index_digraph(const DispatchDigraph& g) {
  Tables t;
  t.n_emg = g.n_emergencies();
  t.n_amb = static_cast<int>(g.fleet.size());
  t.n_w = g.n_waiting;
  const std::size_t ae = static_cast<std::size_t>(t.n_amb) *
                         static_cast<std::size_t>(std::max(t.n_emg, 1));
  t.amb_emg.assign(ae, -1);
  t.amb_w.assign(static_cast<std::size_t>(t.n_amb) * t.n_w, -1);
  t.emg_w.assign(static_cast<std::size_t>(std::max(t.n_emg, 1)) * t.n_w, -1);
  t.ambw_emg.assign(static_cast<std::size_t>(t.n_amb) * t.n_w *
                        static_cast<std::size_t>(std::max(t.n_emg, 1)),
                    -1);
  t.emgw_emg.assign(static_cast<std::size_t>(std::max(t.n_emg, 1)) * t.n_w *
                        static_cast<std::size_t>(std::max(t.n_emg, 1)),
                    -1);
  t.emg_emg.assign(static_cast<std::size_t>(std::max(t.n_emg, 1)) *
                       static_cast<std::size_t>(std::max(t.n_emg, 1)),
                   -1);
  t.amb_sink.assign(static_cast<std::size_t>(t.n_amb), -1);
  t.ambw_sink.assign(static_cast<std::size_t>(t.n_amb) * t.n_w, -1);
  t.emgw_sink.assign(static_cast<std::size_t>(std::max(t.n_emg, 1)) * t.n_w, -1);
  t.source_amb.assign(static_cast<std::size_t>(t.n_amb), -1);
  t.ambw_vertex.assign(static_cast<std::size_t>(t.n_amb) * t.n_w, -1);
  t.emgw_vertex.assign(static_cast<std::size_t>(std::max(t.n_emg, 1)) * t.n_w,
                       -1);

  std::unordered_map<int, int> amb_index;  // ambulance id -> dense index
  for (int m = 0; m < t.n_amb; ++m) {
    amb_index[g.fleet[static_cast<std::size_t>(m)].id] = m;
  }
  auto vmeta = [&](int vid) -> const DigraphVertex& {
    return g.vertices[static_cast<std::size_t>(vid)];
  };
  for (std::size_t a = 0; a < g.arcs.size(); ++a) {
    const auto& arc = g.arcs[a];
    const auto& vf = vmeta(arc.from);
    const auto& vt = vmeta(arc.to);
    const int id = static_cast<int>(a);
    if (vf.kind == VertexKind::Source && vt.kind == VertexKind::Ambulance) {
      t.source_amb[static_cast<std::size_t>(amb_index[vt.ambulance_id])] = id;
    } else if (vf.kind == VertexKind::Ambulance &&
               vt.kind == VertexKind::Emergency) {
      t.at(t.amb_emg, amb_index[vf.ambulance_id], vt.emergency_index,
           std::max(t.n_emg, 1)) = id;
    } else if (vf.kind == VertexKind::Ambulance &&
               vt.kind == VertexKind::Redeploy) {
      t.at(t.amb_w, amb_index[vf.ambulance_id], vt.waiting_index, t.n_w) = id;
      t.at(t.ambw_vertex, amb_index[vf.ambulance_id], vt.waiting_index, t.n_w) =
          arc.to;
    } else if (vf.kind == VertexKind::Emergency &&
               vt.kind == VertexKind::Redeploy) {
      t.at(t.emg_w, vf.emergency_index, vt.waiting_index, t.n_w) = id;
      t.at(t.emgw_vertex, vf.emergency_index, vt.waiting_index, t.n_w) = arc.to;
    } else if (vf.kind == VertexKind::Redeploy &&
               vt.kind == VertexKind::Emergency) {
      if (vf.emergency_index >= 0) {
        t.emgw_emg[(static_cast<std::size_t>(vf.emergency_index) * t.n_w +
                    static_cast<std::size_t>(vf.waiting_index)) *
                       static_cast<std::size_t>(std::max(t.n_emg, 1)) +
                   static_cast<std::size_t>(vt.emergency_index)] = id;
      } else {
        t.ambw_emg[(static_cast<std::size_t>(amb_index[vf.ambulance_id]) *
                        t.n_w +
                    static_cast<std::size_t>(vf.waiting_index)) *
                       static_cast<std::size_t>(std::max(t.n_emg, 1)) +
                   static_cast<std::size_t>(vt.emergency_index)] = id;
      }
    } else if (vf.kind == VertexKind::Emergency &&
               vt.kind == VertexKind::Emergency) {
      t.at(t.emg_emg, vf.emergency_index, vt.emergency_index,
           std::max(t.n_emg, 1)) = id;
    } else if (vf.kind == VertexKind::Ambulance && vt.kind == VertexKind::Sink) {
      t.amb_sink[static_cast<std::size_t>(amb_index[vf.ambulance_id])] = id;
    } else if (vf.kind == VertexKind::Redeploy && vt.kind == VertexKind::Sink) {
      if (vf.emergency_index >= 0) {
        t.at(t.emgw_sink, vf.emergency_index, vf.waiting_index, t.n_w) = id;
      } else {
        t.at(t.ambw_sink, amb_index[vf.ambulance_id], vf.waiting_index, t.n_w) =
            id;
      }
    }
  }
  return t;
}

// Decision code for emergency j assigned to ambulance slot m:
//   0            direct from the start vertex
//   1..n_w       via waiting location (mode-1)
//   n_w+1        direct continuation from the previous emergency
// Codes order children deterministically; `drop` sorts after all serves.
inline std::uint16_t choice_code(int amb_slot, int mode, int n_w) {
  return static_cast<std::uint16_t>(amb_slot * (n_w + 2) + mode);
}

}  // namespace offline_detail

class OfflineSolver {
 public:
  OfflineSolver(const ScenarioConfig& scenario, const DispatchDigraph& g)
      : scenario_(scenario), g_(g), t_(offline_detail::index_digraph(g)) {}

  OfflineSolution solve_hard() { return solve(false, 0.0); }

  OfflineSolution solve_soft(double gamma) {
    if (!(gamma >= 0.0)) throw InputError("solve_offline_soft: gamma < 0");
    return solve(true, gamma);
  }

 private:
  using Frontier = offline_detail::Frontier;

  struct Node {
    double f = 0.0;
    double g_cost = 0.0;
    int k = 0;
    std::vector<Frontier> fr;
    std::vector<std::uint16_t> seq;
    std::uint64_t order = 0;
  };

  struct NodeCmp {
    bool operator()(const Node& a, const Node& b) const {
      if (a.f != b.f) return a.f > b.f;
      if (a.seq != b.seq) return a.seq > b.seq;
      return a.order > b.order;
    }
  };

  static std::vector<std::uint64_t> state_key(const Node& n) {
    std::vector<std::uint64_t> key;
    key.reserve(1 + 2 * n.fr.size());
    key.push_back(static_cast<std::uint64_t>(n.k));
    for (const auto& f : n.fr) {
      key.push_back((static_cast<std::uint64_t>(f.kind) << 32) ^
                    static_cast<std::uint64_t>(f.last + 1));
      std::uint64_t bits;
      std::memcpy(&bits, &f.completion, sizeof(bits));
      key.push_back(bits);
    }
    return key;
  }

  struct KeyHash {
    std::size_t operator()(const std::vector<std::uint64_t>& k) const {
      std::uint64_t h = 1469598103934665603ull;
      for (auto v : k) {
        h ^= v;
        h *= 1099511628211ull;
      }
      return static_cast<std::size_t>(h);
    }
  };

  // Elapsed response of emergency j when ambulance slot m serves it through
  // `mode`; < 0 when the connection is unusable. Mirrors core::respond.
  double connection_cost(const Frontier& f, int m, int j, int mode) const {
    const Request& r = g_.emergencies[static_cast<std::size_t>(j)];
    const int n_w = t_.n_w;
    if (mode == 0) {  // direct from the start / previous vertex position
      if (f.kind != 0) return -1.0;
      if (t_.get(t_.amb_emg, m, j, std::max(t_.n_emg, 1)) < 0) return -1.0;
      const Arrival a = respond(f.completion, f.at, r, g_.speed_kmh);
      return a.response_s - r.entry_s;
    }
    if (mode >= 1 && mode <= n_w) {
      const int w = mode - 1;
      int via_arc = -1;
      if (f.kind == 0) {
        via_arc = t_.get(t_.amb_w, m, w, n_w) >= 0
                      ? t_.get3(t_.ambw_emg, m, w, j, n_w, std::max(t_.n_emg, 1))
                      : -1;
      } else {
        via_arc = t_.get(t_.emg_w, f.last, w, n_w) >= 0
                      ? t_.get3(t_.emgw_emg, f.last, w, j, n_w,
                                std::max(t_.n_emg, 1))
                      : -1;
      }
      if (via_arc < 0) return -1.0;
      const auto& wloc =
          scenario_.waiting_locations[static_cast<std::size_t>(w)];
      Request park;
      park.kind = RequestKind::Redeployment;
      park.origin = park.dropoff = wloc;
      park.entry_s = entry_plus_service(f);
      const Arrival at_w = respond(f.completion, f.at, park, g_.speed_kmh);
      const Arrival a = respond(at_w.completion_s, wloc, r, g_.speed_kmh);
      return a.response_s - r.entry_s;
    }
    if (mode == n_w + 1) {  // queued continuation
      if (f.kind != 1) return -1.0;
      if (t_.get(t_.emg_emg, f.last, j, std::max(t_.n_emg, 1)) < 0) return -1.0;
      if (f.completion < r.entry_s) return -1.0;  // only while r is waiting
      const Arrival a = respond(f.completion, f.at, r, g_.speed_kmh);
      return a.response_s - r.entry_s;
    }
    return -1.0;
  }

  double entry_plus_service(const Frontier& f) const {
    if (f.kind == 0) {
      return f.completion;  // ambulance release time
    }
    const Request& r = g_.emergencies[static_cast<std::size_t>(f.last)];
    return r.entry_s + r.service_s;
  }

  bool closable(const Frontier& f, int m) const {
    if (f.kind == 0) {
      if (!g_.fleet[static_cast<std::size_t>(m)].must_redeploy) {
        return t_.amb_sink[static_cast<std::size_t>(m)] >= 0;
      }
      for (int w = 0; w < t_.n_w; ++w) {
        if (t_.get(t_.amb_w, m, w, t_.n_w) >= 0 &&
            t_.get(t_.ambw_sink, m, w, t_.n_w) >= 0) {
          return true;
        }
      }
      return false;
    }
    for (int w = 0; w < t_.n_w; ++w) {
      if (t_.get(t_.emg_w, f.last, w, t_.n_w) >= 0 &&
          t_.get(t_.emgw_sink, f.last, w, t_.n_w) >= 0) {
        return true;
      }
    }
    return false;
  }

  OfflineSolution solve(bool soft, double gamma) {
    const auto t0 = std::chrono::steady_clock::now();
    const int n = t_.n_emg;
    const int n_amb = t_.n_amb;
    const int n_w = t_.n_w;

    // static per-emergency bound: cheapest incoming travel time
    std::vector<double> lb(static_cast<std::size_t>(n),
                           std::numeric_limits<double>::infinity());
    std::vector<bool> reachable(static_cast<std::size_t>(n), false);
    for (const auto& arc : g_.arcs) {
      const auto& vt = g_.vertices[static_cast<std::size_t>(arc.to)];
      if (vt.kind != VertexKind::Emergency) continue;
      lb[static_cast<std::size_t>(vt.emergency_index)] =
          std::min(lb[static_cast<std::size_t>(vt.emergency_index)], arc.tau_s);
      reachable[static_cast<std::size_t>(vt.emergency_index)] = true;
    }
    if (!soft) {
      std::vector<std::string> unservable;
      for (int j = 0; j < n; ++j) {
        if (!reachable[static_cast<std::size_t>(j)]) {
          unservable.push_back(
              "emergency " +
              std::to_string(g_.emergencies[static_cast<std::size_t>(j)].id));
        }
      }
      if (!unservable.empty()) {
        throw InfeasibleError("offline model infeasible", unservable);
      }
    }
    std::vector<double> h_suffix(static_cast<std::size_t>(n) + 1, 0.0);
    for (int j = n - 1; j >= 0; --j) {
      double per = lb[static_cast<std::size_t>(j)];
      if (soft) per = std::min(per, gamma);
      h_suffix[static_cast<std::size_t>(j)] =
          h_suffix[static_cast<std::size_t>(j) + 1] + per;
    }

    std::priority_queue<Node, std::vector<Node>, NodeCmp> open;
    std::unordered_map<std::vector<std::uint64_t>, std::pair<double, std::vector<std::uint16_t>>,
                       KeyHash>
        closed;
    SolveStats stats;
    std::uint64_t order = 0;

    Node root;
    root.k = 0;
    root.fr.resize(static_cast<std::size_t>(n_amb));
    for (int m = 0; m < n_amb; ++m) {
      auto& f = root.fr[static_cast<std::size_t>(m)];
      f.kind = 0;
      f.last = -1;
      f.completion = g_.fleet[static_cast<std::size_t>(m)].release_s;
      f.at = g_.fleet[static_cast<std::size_t>(m)].loc;
    }
    root.g_cost = 0.0;
    root.f = h_suffix[0];
    root.order = order++;
    open.push(root);
    stats.nodes_pushed++;

    std::optional<Node> goal;
    while (!open.empty()) {
      Node cur = open.top();
      open.pop();
      const auto key = state_key(cur);
      auto it = closed.find(key);
      if (it != closed.end()) {
        const auto& [gc, sq] = it->second;
        if (gc < cur.g_cost || (gc == cur.g_cost && sq <= cur.seq)) continue;
      }
      closed[key] = {cur.g_cost, cur.seq};
      stats.nodes_expanded++;

      if (cur.k == n) {
        bool ok = true;
        for (int m = 0; m < n_amb && ok; ++m) {
          ok = closable(cur.fr[static_cast<std::size_t>(m)], m);
        }
        if (ok) {
          goal = std::move(cur);
          break;
        }
        continue;
      }

      const int j = cur.k;
      for (int m = 0; m < n_amb; ++m) {
        const Frontier& f = cur.fr[static_cast<std::size_t>(m)];
        for (int mode = 0; mode <= n_w + 1; ++mode) {
          const double cost = connection_cost(f, m, j, mode);
          if (cost < 0.0) continue;
          Node child = cur;
          child.k = j + 1;
          auto& nf = child.fr[static_cast<std::size_t>(m)];
          const Request& r = g_.emergencies[static_cast<std::size_t>(j)];
          nf.kind = 1;
          nf.last = j;
          nf.completion = r.entry_s + cost + r.service_s;
          nf.at = r.dropoff;
          child.g_cost = cur.g_cost + cost;
          child.f = child.g_cost + h_suffix[static_cast<std::size_t>(j) + 1];
          child.seq.push_back(offline_detail::choice_code(m, mode, n_w));
          child.order = order++;
          open.push(std::move(child));
          stats.nodes_pushed++;
        }
      }
      if (soft) {
        Node child = cur;
        child.k = j + 1;
        child.g_cost = cur.g_cost + gamma;
        child.f = child.g_cost + h_suffix[static_cast<std::size_t>(j) + 1];
        child.seq.push_back(
            static_cast<std::uint16_t>(n_amb * (n_w + 2)));  // drop, sorts last
        child.order = order++;
        open.push(std::move(child));
        stats.nodes_pushed++;
      }
    }

    if (!goal.has_value()) {
      throw InfeasibleError("offline model infeasible",
                            {"no vertex-disjoint path decomposition"});
    }
    stats.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    return extract(*goal, soft, gamma, stats);
  }

  OfflineSolution extract(const Node& goal, bool soft, double gamma,
                          SolveStats stats) const;

  const ScenarioConfig& scenario_;
  const DispatchDigraph& g_;
  offline_detail::Tables t_;
};

/// Globally optimal hard-constraint solution: every emergency served,
/// every ambulance on exactly one path. Deterministic tie-breaking by the
/// lexicographic order of the time-ordered decision sequence.
inline OfflineSolution solve_offline_hard(const ScenarioConfig& scenario,
                                          const DispatchDigraph& g) {
  return OfflineSolver(scenario, g).solve_hard();
}

/// Soft variant: emergencies may be dropped at penalty gamma per request.
/// Objective follows the penalized form (unserved requests forfeit -gamma).
inline OfflineSolution solve_offline_soft(const ScenarioConfig& scenario,
                                          const DispatchDigraph& g,
                                          double gamma) {
  if (!(gamma >= 0.0)) throw InputError("solve_offline_soft: gamma must be >= 0");
  return OfflineSolver(scenario, g).solve_soft(gamma);
}

}  // namespace ems

#include "ems/offline_extract.hpp"
