#pragma once

// Out-of-line part of offline.hpp: turning a search goal node back into
// selected arcs, per-arc response/delay terms and per-ambulance plans.

#include "ems/offline.hpp"

namespace ems {

inline OfflineSolution OfflineSolver::extract(const Node& goal, bool soft,
                                              double gamma,
                                              SolveStats stats) const {
  using offline_detail::Frontier;
  const int n = t_.n_emg;
  const int n_amb = t_.n_amb;
  const int n_w = t_.n_w;
  const std::uint16_t drop_code =
      static_cast<std::uint16_t>(n_amb * (n_w + 2));

  OfflineSolution sol;
  sol.soft = soft;
  sol.gamma = gamma;
  sol.stats = stats;
  sol.x.assign(g_.arcs.size(), 0);
  sol.alpha.assign(g_.arcs.size(), 0.0);
  sol.beta.assign(g_.arcs.size(), 0.0);
  sol.emergency_elapsed_s.assign(static_cast<std::size_t>(n), -1.0);
  sol.plans.resize(static_cast<std::size_t>(n_amb));
  for (int m = 0; m < n_amb; ++m) {
    sol.plans[static_cast<std::size_t>(m)].ambulance_id =
        g_.fleet[static_cast<std::size_t>(m)].id;
  }

  auto select = [&](int arc_id, double alpha_val, double beta_val) {
    if (arc_id < 0) throw InternalError("offline extract: missing arc");
    sol.x[static_cast<std::size_t>(arc_id)] = 1;
    sol.alpha[static_cast<std::size_t>(arc_id)] = alpha_val;
    sol.beta[static_cast<std::size_t>(arc_id)] = beta_val;
  };

  for (int m = 0; m < n_amb; ++m) {
    select(t_.source_amb[static_cast<std::size_t>(m)], 0.0, 0.0);
  }

  // replay the decision sequence, mirroring the search transitions
  std::vector<Frontier> fr(static_cast<std::size_t>(n_amb));
  std::vector<double> alpha_into_vertex(g_.vertices.size(), 0.0);
  for (int m = 0; m < n_amb; ++m) {
    auto& f = fr[static_cast<std::size_t>(m)];
    f.kind = 0;
    f.last = -1;
    f.completion = g_.fleet[static_cast<std::size_t>(m)].release_s;
    f.at = g_.fleet[static_cast<std::size_t>(m)].loc;
  }
  double objective_hard = 0.0;
  int served = 0;

  auto park_request = [&](int w, double entry) {
    Request park;
    park.kind = RequestKind::Redeployment;
    park.origin = park.dropoff =
        scenario_.waiting_locations[static_cast<std::size_t>(w)];
    park.entry_s = entry;
    return park;
  };

  for (int j = 0; j < n; ++j) {
    const std::uint16_t code = goal.seq[static_cast<std::size_t>(j)];
    const Request& r = g_.emergencies[static_cast<std::size_t>(j)];
    if (code == drop_code) {
      sol.dropped.push_back(r.id);
      continue;
    }
    const int m = code / (n_w + 2);
    const int mode = code % (n_w + 2);
    Frontier& f = fr[static_cast<std::size_t>(m)];
    auto& plan = sol.plans[static_cast<std::size_t>(m)];
    const int emg_vertex =
        g_.emergency_vertices[static_cast<std::size_t>(j)];

    double elapsed = 0.0;
    if (mode == 0) {
      const Arrival a = respond(f.completion, f.at, r, g_.speed_kmh);
      elapsed = a.response_s - r.entry_s;
      const int arc = t_.get(t_.amb_emg, m, j, std::max(n, 1));
      select(arc, elapsed,
             std::max(f.completion - r.entry_s, 0.0));
    } else if (mode >= 1 && mode <= n_w) {
      const int w = mode - 1;
      const double e_park = entry_plus_service(f);
      const Request park = park_request(w, e_park);
      const Arrival at_w = respond(f.completion, f.at, park, g_.speed_kmh);
      const Arrival a =
          respond(at_w.completion_s, park.origin, r, g_.speed_kmh);
      elapsed = a.response_s - r.entry_s;
      int via_arc = -1, in_arc = -1, w_vertex = -1;
      if (f.kind == 0) {
        via_arc = t_.get(t_.amb_w, m, w, n_w);
        in_arc = t_.get3(t_.ambw_emg, m, w, j, n_w, std::max(n, 1));
        w_vertex = t_.get(t_.ambw_vertex, m, w, n_w);
      } else {
        via_arc = t_.get(t_.emg_w, f.last, w, n_w);
        in_arc = t_.get3(t_.emgw_emg, f.last, w, j, n_w, std::max(n, 1));
        w_vertex = t_.get(t_.emgw_vertex, f.last, w, n_w);
      }
      // beta on the park arc equals the upstream response term
      const double alpha_w = at_w.response_s - e_park;
      select(via_arc, alpha_w, std::max(f.completion - e_park, 0.0));
      alpha_into_vertex[static_cast<std::size_t>(w_vertex)] = alpha_w;
      select(in_arc, elapsed, std::max(at_w.completion_s - r.entry_s, 0.0));
      plan.steps.push_back(PlanStep{PlanStep::Kind::Redeploy, 0, w});
    } else {  // queued continuation
      const Arrival a = respond(f.completion, f.at, r, g_.speed_kmh);
      elapsed = a.response_s - r.entry_s;
      const int arc = t_.get(t_.emg_emg, f.last, j, std::max(n, 1));
      select(arc, elapsed, std::max(f.completion - r.entry_s, 0.0));
    }
    alpha_into_vertex[static_cast<std::size_t>(emg_vertex)] = elapsed;
    sol.emergency_elapsed_s[static_cast<std::size_t>(j)] = elapsed;
    objective_hard += elapsed;
    ++served;
    plan.steps.push_back(PlanStep{PlanStep::Kind::Serve, r.id, -1});

    f.kind = 1;
    f.last = j;
    f.completion = r.entry_s + elapsed + r.service_s;
    f.at = r.dropoff;
  }

  // close every path deterministically: lowest feasible waiting location
  for (int m = 0; m < n_amb; ++m) {
    Frontier& f = fr[static_cast<std::size_t>(m)];
    auto& plan = sol.plans[static_cast<std::size_t>(m)];
    if (f.kind == 0) {
      if (!g_.fleet[static_cast<std::size_t>(m)].must_redeploy) {
        select(t_.amb_sink[static_cast<std::size_t>(m)], 0.0, 0.0);
        continue;
      }
      for (int w = 0; w < n_w; ++w) {
        const int via = t_.get(t_.amb_w, m, w, n_w);
        const int out = t_.get(t_.ambw_sink, m, w, n_w);
        if (via >= 0 && out >= 0) {
          const double e_park = f.completion;
          const Request park = park_request(w, e_park);
          const Arrival at_w = respond(f.completion, f.at, park, g_.speed_kmh);
          select(via, at_w.response_s - e_park, 0.0);
          const int wv = t_.get(t_.ambw_vertex, m, w, n_w);
          alpha_into_vertex[static_cast<std::size_t>(wv)] =
              at_w.response_s - e_park;
          select(out, 0.0, 0.0);
          plan.steps.push_back(PlanStep{PlanStep::Kind::Redeploy, 0, w});
          break;
        }
      }
      continue;
    }
    bool closed = false;
    for (int w = 0; w < n_w && !closed; ++w) {
      const int via = t_.get(t_.emg_w, f.last, w, n_w);
      const int out = t_.get(t_.emgw_sink, f.last, w, n_w);
      if (via >= 0 && out >= 0) {
        const double e_park = entry_plus_service(f);
        const Request park = park_request(w, e_park);
        const Arrival at_w = respond(f.completion, f.at, park, g_.speed_kmh);
        select(via, at_w.response_s - e_park,
               std::max(f.completion - e_park, 0.0));
        const int wv = t_.get(t_.emgw_vertex, f.last, w, n_w);
        alpha_into_vertex[static_cast<std::size_t>(wv)] =
            at_w.response_s - e_park;
        select(out, 0.0, 0.0);
        plan.steps.push_back(PlanStep{PlanStep::Kind::Redeploy, 0, w});
        closed = true;
      }
    }
    if (!closed) throw InternalError("offline extract: unclosable path");
  }

  // delays on unselected arcs follow from the selected upstream responses
  for (std::size_t a = 0; a < g_.arcs.size(); ++a) {
    if (sol.x[a]) continue;
    const auto& arc = g_.arcs[a];
    const auto& vt = g_.vertices[static_cast<std::size_t>(arc.to)];
    if (vt.kind != VertexKind::Emergency && vt.kind != VertexKind::Redeploy) {
      continue;
    }
    const double upstream =
        alpha_into_vertex[static_cast<std::size_t>(arc.from)];
    sol.beta[a] = std::max(upstream - arc.slack_s, 0.0);
  }

  sol.objective =
      soft ? objective_hard - gamma * static_cast<double>(served)
           : objective_hard;
  return sol;
}

}  // namespace ems
