#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ems/benchmarks.hpp"
#include "ems/simulator.hpp"

using namespace ems;

namespace {

ScenarioConfig tiny_scenario(int fleet, int n_wait = 3) {
  ScenarioConfig s;
  s.fleet_size = fleet;
  for (int w = 0; w < n_wait; ++w) {
    s.waiting_locations.push_back(Location{37.70 + 0.02 * w, -122.45});
  }
  s.horizon_s = 6 * 3600.0;
  s.speed_kmh = 30.0;
  return s;
}

Request emergency(std::int64_t id, double entry, Location at,
                  double service = 600.0) {
  Request r;
  r.id = id;
  r.kind = RequestKind::Emergency;
  r.origin = r.dropoff = at;
  r.entry_s = entry;
  r.service_s = service;
  return r;
}

std::vector<Request> random_stream(std::mt19937_64& rng, int n,
                                   double horizon) {
  std::uniform_real_distribution<double> t(0.0, horizon);
  std::uniform_real_distribution<double> lat(37.68, 37.80);
  std::uniform_real_distribution<double> lon(-122.50, -122.38);
  std::uniform_real_distribution<double> service(300.0, 1200.0);
  std::vector<Request> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(emergency(i, t(rng), Location{lat(rng), lon(rng)},
                            service(rng)));
  }
  sort_requests(out);
  return out;
}

}  // namespace

TEST_CASE("feasible actions per event type") {
  const ScenarioConfig s = tiny_scenario(2);
  SystemState x;
  x.clock = 100.0;
  for (int i = 0; i < 2; ++i) {
    AmbulanceState a;
    a.id = i;
    a.initial = s.waiting_locations[static_cast<std::size_t>(i)];
    x.ambulances.push_back(a);
  }
  x.arriving = {emergency(1, 100.0, Location{37.75, -122.42})};

  SECTION("two idle ambulances give two edges") {
    const auto fa = feasible_actions(x);
    CHECK(fa.edges.size() == 2);
    CHECK_FALSE(fa.forced);
  }
  SECTION("no idle ambulance gives the empty set") {
    for (auto& a : x.ambulances) {
      ScheduleEntry busy;
      busy.kind = RequestKind::Emergency;
      busy.completion_s = 500.0;
      busy.dropoff = a.initial;
      a.schedule.push_back(busy);
    }
    CHECK(feasible_actions(x).edges.empty());
  }
  SECTION("freed ambulance with empty queue sees every waiting location") {
    x.redeploy_ambulance = 0;
    x.arriving.clear();
    for (std::size_t w = 0; w < s.waiting_locations.size(); ++w) {
      Request opt;
      opt.id = -3 + static_cast<std::int64_t>(w);
      opt.kind = RequestKind::Redeployment;
      opt.origin = opt.dropoff = s.waiting_locations[w];
      opt.entry_s = 100.0;
      x.arriving.push_back(opt);
    }
    const auto fa = feasible_actions(x);
    CHECK(fa.edges.size() == 3);
  }
  SECTION("freed ambulance with queued request is forced to the head") {
    x.redeploy_ambulance = 0;
    x.fifo.push_back(emergency(9, 50.0, Location{37.76, -122.40}));
    const auto fa = feasible_actions(x);
    REQUIRE(fa.forced);
    REQUIRE(fa.edges.size() == 1);
    CHECK(fa.edges[0].target.id == 9);
  }
}

TEST_CASE("episode rollouts") {
  const ScenarioConfig s = tiny_scenario(1);
  CicsPolicy cics(s);

  SECTION("zero requests: empty trace, no movement") {
    const auto trace = run_episode(s, {}, cics);
    CHECK(trace.events.empty());
    CHECK(trace.served_emergencies == 0);
    for (const auto& a : trace.final_schedules) CHECK(a.schedule.empty());
  }

  SECTION("one request: dispatch, then a chosen redeployment") {
    const auto trace = run_episode(
        s, {emergency(1, 600.0, Location{37.76, -122.40})}, cics);
    CHECK(trace.served_emergencies == 1);
    REQUIRE(trace.final_schedules.size() == 1);
    const auto& sched = trace.final_schedules[0].schedule;
    REQUIRE(sched.size() == 2);
    CHECK(sched[0].kind == RequestKind::Emergency);
    CHECK(sched[1].kind == RequestKind::Redeployment);
    bool saw_batch = false;
    for (const auto& ev : trace.events) {
      saw_batch |= (ev.kind == EventKind::RedeployBatch);
    }
    CHECK(saw_batch);
  }

  SECTION("identical streams give identical traces") {
    std::mt19937_64 rng(42);
    const auto stream = random_stream(rng, 12, s.horizon_s);
    const auto t1 = run_episode(s, stream, cics, 7);
    const auto t2 = run_episode(s, stream, cics, 7);
    REQUIRE(t1.events.size() == t2.events.size());
    for (std::size_t i = 0; i < t1.events.size(); ++i) {
      CHECK(t1.events[i].t == t2.events[i].t);
      CHECK(t1.events[i].state_digest == t2.events[i].state_digest);
    }
    CHECK(t1.sum_elapsed_response_s() == t2.sum_elapsed_response_s());
  }
}

TEST_CASE("episode invariants on random streams") {
  const ScenarioConfig s = tiny_scenario(3, 2);
  CicsPolicy cics(s);
  std::mt19937_64 rng(1234);
  for (int it = 0; it < 20; ++it) {
    const auto stream = random_stream(rng, 15, s.horizon_s);
    const auto trace = run_episode(s, stream, cics);

    // every emergency served exactly once
    std::map<std::int64_t, int> served;
    for (const auto& a : trace.final_schedules) {
      for (const auto& e : a.schedule) {
        if (e.kind == RequestKind::Emergency) served[e.request_id]++;
      }
    }
    CHECK(served.size() == stream.size());
    for (const auto& [id, count] : served) CHECK(count == 1);

    // no overlapping busy intervals, chain timing reproducible
    for (const auto& a : trace.final_schedules) {
      double prev_completion = 0.0;
      Location prev_at = a.initial;
      for (const auto& e : a.schedule) {
        CHECK(e.depart_s >= prev_completion);
        Request r;
        r.kind = e.kind;
        r.origin = e.origin;
        r.dropoff = e.dropoff;
        r.entry_s = e.entry_s;
        r.service_s = e.completion_s - e.response_s;
        const Arrival again = respond(prev_completion, prev_at, r, s.speed_kmh);
        CHECK(again.response_s == e.response_s);
        prev_completion = e.completion_s;
        prev_at = e.dropoff;
      }
    }

    // event times never decrease
    double t_prev = 0.0;
    for (const auto& ev : trace.events) {
      CHECK(ev.t >= t_prev);
      t_prev = ev.t;
    }
  }
}

TEST_CASE("queued request is taken FIFO by the next freed ambulance") {
  ScenarioConfig s = tiny_scenario(1, 2);
  const Location far{37.80, -122.38};
  std::vector<Request> stream = {
      emergency(0, 0.0, far, 3000.0),
      emergency(1, 100.0, Location{37.70, -122.45}, 10.0),
      emergency(2, 200.0, Location{37.72, -122.45}, 10.0),
  };
  CicsPolicy cics(s);
  const auto trace = run_episode(s, stream, cics);
  const auto& sched = trace.final_schedules[0].schedule;
  REQUIRE(sched.size() >= 3);
  // requests 1 and 2 queue while 0 is served, then leave in entry order
  CHECK(sched[0].request_id == 0);
  CHECK(sched[1].request_id == 1);
  CHECK(sched[2].request_id == 2);
  CHECK(sched[1].depart_s >= sched[0].completion_s);
  std::size_t forced = 0;
  for (const auto& ev : trace.events) {
    if (ev.kind == EventKind::ForcedDispatch) ++forced;
  }
  CHECK(forced == 2);
}

TEST_CASE("step transition mirrors the engine on forced dispatch") {
  ScenarioConfig s = tiny_scenario(1, 2);
  SystemState x;
  AmbulanceState a;
  a.id = 0;
  a.initial = s.waiting_locations[0];
  x.ambulances.push_back(a);
  x.clock = 0.0;
  x.arriving = {emergency(0, 0.0, Location{37.80, -122.38}, 3000.0)};

  std::deque<Request> incoming = {
      emergency(1, 100.0, Location{37.70, -122.45}, 10.0)};

  // dispatch the only ambulance
  auto fa = feasible_actions(x);
  REQUIRE(fa.edges.size() == 1);
  SystemState x1 = step(s, x, fa.edges[0], incoming);
  REQUIRE(x1.arriving.size() == 1);
  CHECK(x1.arriving.front().id == 1);

  // nobody idle: the request must queue
  CHECK(feasible_actions(x1).edges.empty());
  SystemState x2 = step(s, x1, std::nullopt, incoming);
  // next decision: the freed ambulance is forced to the queue head
  REQUIRE(x2.redeploy_ambulance == 0);
  auto fa2 = feasible_actions(x2);
  REQUIRE(fa2.forced);
  CHECK(fa2.edges[0].target.id == 1);
  SystemState x3 = step(s, x2, fa2.edges[0], incoming);
  // serving request 1 leads to its redeployment batch
  REQUIRE(x3.redeploy_ambulance == 0);
  CHECK(feasible_actions(x3).edges.size() == 2);
  CHECK(x3.ambulances[0].schedule.size() == 2);

  // infeasible decision is rejected
  Action bogus;
  bogus.ambulance_id = 5;
  bogus.target = emergency(99, 0.0, Location{37.7, -122.4});
  CHECK_THROWS_AS(step(s, x3, bogus, incoming), InternalError);
}
