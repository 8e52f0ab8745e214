#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ems/benchmarks.hpp"
#include "ems/offline.hpp"
#include "ems/offline_oracle.hpp"
#include "ems/simulator.hpp"
#include "test_util.hpp"

using namespace ems;
using ems::testutil::random_emergencies;
using ems::testutil::random_scenario;

namespace {

bool plans_equal(const std::vector<AmbulancePlan>& a,
                 const std::vector<AmbulancePlan>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].ambulance_id != b[i].ambulance_id) return false;
    if (a[i].steps.size() != b[i].steps.size()) return false;
    for (std::size_t k = 0; k < a[i].steps.size(); ++k) {
      const auto& x = a[i].steps[k];
      const auto& y = b[i].steps[k];
      if (x.kind != y.kind) return false;
      if (x.kind == PlanStep::Kind::Serve && x.request_id != y.request_id)
        return false;
      if (x.kind == PlanStep::Kind::Redeploy && x.waiting_index != y.waiting_index)
        return false;
    }
  }
  return true;
}

void prune_arcs_into_emergency(DispatchDigraph& g, int emergency_index) {
  std::vector<DigraphArc> kept;
  for (const auto& arc : g.arcs) {
    const auto& vt = g.vertices[static_cast<std::size_t>(arc.to)];
    if (vt.kind == VertexKind::Emergency &&
        vt.emergency_index == emergency_index) {
      continue;
    }
    kept.push_back(arc);
  }
  g.arcs = std::move(kept);
}

}  // namespace

TEST_CASE("digraph construction rules") {
  std::mt19937_64 rng(3);
  SECTION("one ambulance, one emergency, two waiting locations") {
    ScenarioConfig s = random_scenario(rng, 1, 2);
    const auto reqs = random_emergencies(rng, 1, s.horizon_s);
    const auto g = build_digraph(s, reqs);
    CHECK(g.vertices.size() == 6);  // source, sink, m, r, two options
    CHECK(g.arcs.size() == 7);
  }
  SECTION("no emergencies leaves only start-to-sink paths") {
    ScenarioConfig s = random_scenario(rng, 2, 2);
    const auto g = build_digraph(s, {});
    CHECK(g.vertices.size() == 4);
    CHECK(g.arcs.size() == 4);  // two source arcs, two sink arcs
    const auto sol = solve_offline_hard(s, g);
    CHECK(sol.objective == 0.0);
    for (const auto& p : sol.plans) CHECK(p.steps.empty());
  }
  SECTION("equal entry times get no direct-continuation arc") {
    ScenarioConfig s = random_scenario(rng, 1, 1);
    auto reqs = random_emergencies(rng, 2, s.horizon_s);
    reqs[1].entry_s = reqs[0].entry_s;
    const auto g = build_digraph(s, reqs);
    for (const auto& arc : g.arcs) CHECK_FALSE(arc.conditional);
  }
  SECTION("conditional arcs only between ordered emergencies") {
    ScenarioConfig s = random_scenario(rng, 2, 2);
    const auto reqs = random_emergencies(rng, 4, s.horizon_s);
    const auto g = build_digraph(s, reqs);
    int conditional = 0;
    for (const auto& arc : g.arcs) {
      if (!arc.conditional) continue;
      ++conditional;
      const auto& vf = g.vertices[static_cast<std::size_t>(arc.from)];
      const auto& vt = g.vertices[static_cast<std::size_t>(arc.to)];
      CHECK(vf.kind == VertexKind::Emergency);
      CHECK(vt.kind == VertexKind::Emergency);
      CHECK(vf.entry_s < vt.entry_s);
    }
    CHECK(conditional == 6);  // 4 choose 2 ordered pairs
  }
}

TEST_CASE("hard model on hand instances") {
  std::mt19937_64 rng(9);
  SECTION("single feasible schedule up to the waiting choice") {
    ScenarioConfig s;
    s.fleet_size = 1;
    s.waiting_locations = {Location{37.70, -122.45}, Location{37.86, -122.37}};
    s.initial_locations = {Location{37.70, -122.45}};
    s.horizon_s = 4 * 3600.0;
    Request r;
    r.id = 0;
    r.origin = r.dropoff = Location{37.7225, -122.45};  // 2.5 km north
    r.entry_s = 0.0;
    r.service_s = 900.0;
    const double tau = s.travel_s(s.initial_locations[0], r.origin);
    const auto g = build_digraph(s, {r});
    const auto sol = solve_offline_hard(s, g);
    CHECK(sol.objective == tau);
    REQUIRE(sol.plans.size() == 1);
    REQUIRE(sol.plans[0].steps.size() == 2);
    CHECK(sol.plans[0].steps[0].kind == PlanStep::Kind::Serve);
    CHECK(sol.plans[0].steps[1].kind == PlanStep::Kind::Redeploy);
  }
  SECTION("unreachable emergency reported infeasible") {
    ScenarioConfig s = random_scenario(rng, 2, 2);
    const auto reqs = random_emergencies(rng, 3, s.horizon_s);
    auto g = build_digraph(s, reqs);
    prune_arcs_into_emergency(g, 1);
    try {
      solve_offline_hard(s, g);
      FAIL("expected infeasibility");
    } catch (const InfeasibleError& e) {
      REQUIRE(e.unservable.size() == 1);
      CHECK(e.unservable[0].find(std::to_string(reqs[1].id)) !=
            std::string::npos);
    }
  }
}

TEST_CASE("hard model equals the exhaustive oracle") {
  std::mt19937_64 rng(20240810);
  std::uniform_int_distribution<int> fleet(1, 3);
  std::uniform_int_distribution<int> nreq(0, 4);
  std::uniform_int_distribution<int> nwait(1, 2);
  for (int it = 0; it < 60; ++it) {
    const ScenarioConfig s = random_scenario(rng, fleet(rng), nwait(rng));
    const auto reqs = random_emergencies(rng, nreq(rng), s.horizon_s);
    const auto g = build_digraph(s, reqs);
    const auto sol = solve_offline_hard(s, g);
    const auto ref = brute_force_offline(s, reqs);
    CHECK(sol.objective == ref.objective);
    CHECK(plans_equal(sol.plans, ref.plans));
  }
}

TEST_CASE("oracle refuses oversized instances") {
  std::mt19937_64 rng(5);
  const ScenarioConfig s = random_scenario(rng, 4, 2);
  CHECK_THROWS_AS(brute_force_offline(s, {}), InputError);
}

TEST_CASE("soft model behavior") {
  std::mt19937_64 rng(17);
  SECTION("large penalty reproduces the hard arc set") {
    for (int it = 0; it < 15; ++it) {
      const ScenarioConfig s = random_scenario(rng, 2, 2);
      const auto reqs = random_emergencies(rng, 3, s.horizon_s);
      const auto g = build_digraph(s, reqs);
      const auto hard = solve_offline_hard(s, g);
      const auto soft = solve_offline_soft(s, g, 1e6);
      CHECK(hard.x == soft.x);
      CHECK(soft.dropped.empty());
    }
  }
  SECTION("zero penalty drops everything") {
    const ScenarioConfig s = random_scenario(rng, 2, 2);
    const auto reqs = random_emergencies(rng, 3, s.horizon_s);
    const auto g = build_digraph(s, reqs);
    const auto soft = solve_offline_soft(s, g, 0.0);
    CHECK(soft.objective == 0.0);
    CHECK(soft.dropped.size() == 3);
  }
  SECTION("negative penalty is rejected") {
    const ScenarioConfig s = random_scenario(rng, 1, 1);
    const auto g = build_digraph(s, {});
    CHECK_THROWS_AS(solve_offline_soft(s, g, -1.0), InputError);
  }
  SECTION("pruned emergency is dropped, the rest served as without it") {
    const ScenarioConfig s = random_scenario(rng, 2, 2);
    auto reqs = random_emergencies(rng, 4, s.horizon_s);
    auto g = build_digraph(s, reqs);
    prune_arcs_into_emergency(g, 2);
    const auto soft = solve_offline_soft(s, g, 1e6);
    REQUIRE(soft.dropped.size() == 1);
    CHECK(soft.dropped[0] == reqs[2].id);
    std::vector<Request> reduced = reqs;
    reduced.erase(reduced.begin() + 2);
    const auto ref = brute_force_offline(s, reduced);
    CHECK(plans_equal(soft.plans, ref.plans));
  }
}

TEST_CASE("selected arc terms satisfy the linearization identities") {
  std::mt19937_64 rng(23);
  for (int it = 0; it < 10; ++it) {
    const ScenarioConfig s = random_scenario(rng, 2, 2);
    const auto reqs = random_emergencies(rng, 4, s.horizon_s);
    const auto g = build_digraph(s, reqs);
    const auto sol = solve_offline_hard(s, g);

    double objective_from_alpha = 0.0;
    for (std::size_t a = 0; a < g.arcs.size(); ++a) {
      const auto& arc = g.arcs[a];
      const auto& vt = g.vertices[static_cast<std::size_t>(arc.to)];
      const double x = sol.x[a] ? 1.0 : 0.0;
      const double alpha = sol.alpha[a];
      const double beta = sol.beta[a];
      if (vt.kind == VertexKind::Emergency || vt.kind == VertexKind::Redeploy) {
        // alpha = (tau + beta) x, exact for binary x
        CHECK_THAT(alpha, Catch::Matchers::WithinAbs((arc.tau_s + beta) * x,
                                                     1e-6));
        // McCormick envelope with beta in [0, M], x in {0,1}
        const double w = alpha - arc.tau_s * x;
        const double bl = 0.0, bu = g.big_m;
        CHECK(w <= bl * x + beta * 1.0 - bl * 1.0 + 1e-6);
        CHECK(w <= bu * x + beta * 0.0 - bu * 0.0 + 1e-6);
        CHECK(w >= bl * x + beta * 0.0 - bl * 0.0 - 1e-6);
        CHECK(w >= bu * x + beta * 1.0 - bu * 1.0 - 1e-6);
        CHECK(beta >= -1e-9);
        CHECK(beta <= g.big_m + 1e-9);
      } else {
        CHECK(alpha == 0.0);
        CHECK(beta == 0.0);
      }
      if (vt.kind == VertexKind::Emergency && sol.x[a]) {
        objective_from_alpha += alpha;
      }
      // direct continuations require a queued request
      if (arc.conditional && sol.x[a]) CHECK(beta >= 0.0);
    }
    CHECK_THAT(objective_from_alpha,
               Catch::Matchers::WithinAbs(sol.objective, 1e-6));
  }
}

TEST_CASE("replaying the offline solution reproduces its objective") {
  std::mt19937_64 rng(31);
  for (int it = 0; it < 10; ++it) {
    const ScenarioConfig s = random_scenario(rng, 2, 2);
    const auto reqs = random_emergencies(rng, 4, s.horizon_s);
    const auto g = build_digraph(s, reqs);
    const auto sol = solve_offline_hard(s, g);
    ReplayPolicy replay = optimal_replay(sol);
    const auto trace = run_episode(s, reqs, replay);
    CHECK(trace.served_emergencies == reqs.size());
    CHECK_THAT(trace.sum_elapsed_response_s(),
               Catch::Matchers::WithinAbs(sol.objective, 1e-6));
  }
}

TEST_CASE("full information dominates online policies") {
  std::mt19937_64 rng(37);
  int strict = 0, total = 0;
  for (int it = 0; it < 12; ++it) {
    const ScenarioConfig s = random_scenario(rng, 3, 2);
    const auto reqs = random_emergencies(rng, 4, s.horizon_s);
    const auto g = build_digraph(s, reqs);
    const auto sol = solve_offline_hard(s, g);
    CicsPolicy cics(s);
    const auto online = run_episode(s, reqs, cics);
    CHECK(sol.objective <= online.sum_elapsed_response_s() + 1e-6);
    strict += (sol.objective < online.sum_elapsed_response_s() - 1e-6) ? 1 : 0;
    ++total;
  }
  CHECK(total == 12);
  CHECK(strict >= 1);  // most instances leave room below the myopic policy
}
