#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ems/errors.hpp"
#include "ems/simulator.hpp"

namespace ems {

using ThetaVector = std::vector<double>;

struct DecisionEdge {
  int left = 0;   // decider slot
  int right = 0;  // request slot
  int ambulance_id = -1;
  Request target{};
};

// Bipartite decision graph of one epoch: deciders (idle ambulances or the
// freed ambulance) on the left, requests of the arriving batch on the
// right. Edge order is stable: ambulance id, then request id.
struct DecisionGraph {
  int n_left = 0;
  int n_right = 0;
  std::vector<DecisionEdge> edges;
  std::vector<char> left_required;
  std::vector<char> right_required;
  std::vector<int> left_ambulance;          // slot -> ambulance id
  std::vector<std::int64_t> right_request;  // slot -> request id
};

// Edge-selection vector plus the selected indices and objective value.
struct MatchResult {
  std::vector<char> y;            // 0/1 per edge
  std::vector<int> selected;      // ascending edge indices
  double value = 0.0;
};

/// Decision graph for the current batch. Forced FIFO states are handled
/// upstream and rejected here; an empty action set (no idle ambulance)
/// signals a queue-only transition.
inline DecisionGraph build_decision_graph(const SystemState& x) {
  const FeasibleActions fa = feasible_actions(x);
  if (fa.forced) {
    throw InternalError("forced FIFO dispatch: no decision graph to build");
  }
  if (fa.edges.empty()) {
    throw InputError("empty action set: queue-only transition");
  }
  DecisionGraph g;
  if (x.redeploy_ambulance < 0) {
    // one emergency, one edge per idle ambulance; the call must be served
    std::vector<int> idle = x.idle_ambulances();
    std::sort(idle.begin(), idle.end());
    g.n_left = static_cast<int>(idle.size());
    g.n_right = 1;
    g.left_ambulance = idle;
    g.right_request = {x.arriving.front().id};
    g.left_required.assign(static_cast<std::size_t>(g.n_left), 0);
    g.right_required = {1};
    for (int i = 0; i < g.n_left; ++i) {
      g.edges.push_back(DecisionEdge{i, 0, idle[static_cast<std::size_t>(i)],
                                     x.arriving.front()});
    }
  } else {
    // freed ambulance chooses among the redeployment options
    g.n_left = 1;
    g.n_right = static_cast<int>(x.arriving.size());
    g.left_ambulance = {x.redeploy_ambulance};
    g.left_required = {1};
    g.right_required.assign(static_cast<std::size_t>(g.n_right), 0);
    std::vector<Request> batch = x.arriving;
    std::sort(batch.begin(), batch.end(),
              [](const Request& a, const Request& b) { return a.id < b.id; });
    for (int j = 0; j < g.n_right; ++j) {
      const Request& r = batch[static_cast<std::size_t>(j)];
      g.right_request.push_back(r.id);
      g.edges.push_back(DecisionEdge{0, j, x.redeploy_ambulance, r});
    }
  }
  return g;
}

namespace detail {

inline constexpr double kForbid = 1e18;

// Min-cost perfect assignment on a square matrix (potentials method).
// Returns assigned column per row; cost entries >= kForbid/2 are treated
// as unusable and leak into the result only when unavoidable.
inline std::vector<int> hungarian_min(
    const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1,
                             std::numeric_limits<double>::infinity());
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = a[static_cast<std::size_t>(i0 - 1)]
                            [static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[static_cast<std::size_t>(j)] > 0) {
      col_of_row[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] =
          j - 1;
    }
  }
  return col_of_row;
}

struct PaddedSolve {
  bool feasible = false;
  double value = 0.0;            // sum of theta over selected real edges
  std::vector<int> selected;     // real edge indices, ascending
};

// Solves max-weight matching with required-vertex cover on the padded
// (L+R) x (L+R) matrix. `force_in` pins edges, `force_out` bans them.
inline PaddedSolve solve_padded(const DecisionGraph& g,
                                const ThetaVector& theta,
                                const std::vector<char>& force_in,
                                const std::vector<char>& force_out) {
  const int L = g.n_left, R = g.n_right, n = L + R;
  std::vector<std::vector<double>> cost(
      static_cast<std::size_t>(n),
      std::vector<double>(static_cast<std::size_t>(n), kForbid));
  // left x right: real edges (maximize theta => minimize -theta)
  std::vector<std::vector<int>> edge_at(
      static_cast<std::size_t>(L),
      std::vector<int>(static_cast<std::size_t>(R), -1));
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (force_out[e]) continue;
    const auto& ed = g.edges[e];
    cost[static_cast<std::size_t>(ed.left)][static_cast<std::size_t>(ed.right)] =
        -theta[e];
    edge_at[static_cast<std::size_t>(ed.left)]
           [static_cast<std::size_t>(ed.right)] = static_cast<int>(e);
  }
  // dummies: left i may stay unmatched via column R+i, right j via row L+j
  for (int i = 0; i < L; ++i) {
    if (!g.left_required[static_cast<std::size_t>(i)]) {
      cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(R + i)] = 0.0;
    }
  }
  for (int j = 0; j < R; ++j) {
    if (!g.right_required[static_cast<std::size_t>(j)]) {
      cost[static_cast<std::size_t>(L + j)][static_cast<std::size_t>(j)] = 0.0;
    }
  }
  for (int i = L; i < n; ++i) {
    for (int j = R; j < n; ++j) {
      cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 0.0;
    }
  }
  // pinned edges: forbid every alternative for both endpoints
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (!force_in[e]) continue;
    const auto& ed = g.edges[e];
    for (int j = 0; j < n; ++j) {
      if (j != ed.right) {
        cost[static_cast<std::size_t>(ed.left)][static_cast<std::size_t>(j)] =
            kForbid;
      }
    }
    for (int i = 0; i < n; ++i) {
      if (i != ed.left) {
        cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(ed.right)] =
            kForbid;
      }
    }
    cost[static_cast<std::size_t>(ed.left)][static_cast<std::size_t>(ed.right)] =
        -theta[e];
  }

  const std::vector<int> col_of_row = hungarian_min(cost);
  PaddedSolve out;
  for (int i = 0; i < n; ++i) {
    const int j = col_of_row[static_cast<std::size_t>(i)];
    if (cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] >=
        kForbid / 2.0) {
      return out;  // infeasible: a forbidden slot was unavoidable
    }
  }
  out.feasible = true;
  for (int i = 0; i < L; ++i) {
    const int j = col_of_row[static_cast<std::size_t>(i)];
    if (j < R) {
      out.selected.push_back(
          edge_at[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
  }
  std::sort(out.selected.begin(), out.selected.end());
  out.value = 0.0;
  for (int e : out.selected) out.value += theta[static_cast<std::size_t>(e)];
  return out;
}

}  // namespace detail

// Lexicographic canonicalizes ties (reproducible labels); Any returns
// whichever optimum the assignment solver lands on, which is enough for
// perturbation sampling where ties have measure zero.
enum class TieRule { Lexicographic, Any };

/// Exact max-weight matching over the decision graph: every vertex is
/// matched at most once, required vertices exactly once. Among optima the
/// lexicographically smallest edge-index set is returned (values within
/// 1e-9 relative are treated as tied).
inline MatchResult solve_matching(const DecisionGraph& g,
                                  const ThetaVector& theta,
                                  TieRule tie = TieRule::Lexicographic) {
  if (theta.size() != g.edges.size()) {
    throw InputError("solve_matching: theta dimension != edge count");
  }
  for (double t : theta) {
    if (!std::isfinite(t)) throw InputError("solve_matching: non-finite score");
  }
  if (g.edges.empty()) throw InputError("solve_matching: empty graph");

  std::vector<char> in(g.edges.size(), 0), out(g.edges.size(), 0);
  const detail::PaddedSolve base = detail::solve_padded(g, theta, in, out);
  if (!base.feasible) {
    throw InfeasibleError("solve_matching: required vertices cannot be covered");
  }
  const double vstar = base.value;
  const double tol = 1e-9 * (1.0 + std::fabs(vstar));

  if (tie == TieRule::Any) {
    MatchResult res;
    res.selected = base.selected;
    res.y.assign(g.edges.size(), 0);
    for (int e : res.selected) res.y[static_cast<std::size_t>(e)] = 1;
    res.value = base.value;
    return res;
  }

  // Lexicographic refinement: committing in index order, stopping as soon
  // as the committed set alone is optimal.
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    // can we end with only the committed edges?
    std::vector<char> rest_out = out;
    for (std::size_t k = e; k < g.edges.size(); ++k) {
      if (!in[k]) rest_out[k] = 1;
    }
    const auto closed = detail::solve_padded(g, theta, in, rest_out);
    if (closed.feasible && closed.value >= vstar - tol) {
      out = rest_out;
      break;
    }
    // otherwise prefer including this edge when still optimal
    in[e] = 1;
    const auto with_e = detail::solve_padded(g, theta, in, out);
    if (!(with_e.feasible && with_e.value >= vstar - tol)) {
      in[e] = 0;
      out[e] = 1;
    }
  }
  const auto final_solve = detail::solve_padded(g, theta, in, out);
  if (!final_solve.feasible) {
    throw InternalError("solve_matching: refinement lost feasibility");
  }

  MatchResult res;
  res.selected = final_solve.selected;
  res.y.assign(g.edges.size(), 0);
  res.value = 0.0;
  for (int e : res.selected) {
    res.y[static_cast<std::size_t>(e)] = 1;
    res.value += theta[static_cast<std::size_t>(e)];
  }
  return res;
}

}  // namespace ems
