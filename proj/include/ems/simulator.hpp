#pragma once

#include <cstdint>
#include <cstring>
#include <deque>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ems/core.hpp"
#include "ems/errors.hpp"

namespace ems {

// Assignment of one ambulance to one request (dispatch or redeployment).
struct Action {
  int ambulance_id = -1;
  Request target{};
};

// Edge list describing the feasible actions at a decision state.
struct FeasibleActions {
  std::vector<Action> edges;
  bool forced = false;  // queue-head dispatch; decided without a matching call
};

enum class EventKind {
  EmergencyArrival,
  RedeployBatch,
  Dispatch,
  ForcedDispatch,
  Queued,
  Redeploy,
  Freed,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::EmergencyArrival: return "emergency_arrival";
    case EventKind::RedeployBatch: return "redeploy_batch";
    case EventKind::Dispatch: return "dispatch";
    case EventKind::ForcedDispatch: return "forced_dispatch";
    case EventKind::Queued: return "queued";
    case EventKind::Redeploy: return "redeploy";
    case EventKind::Freed: return "freed";
  }
  return "?";
}

// State x_t: clock, the arriving batch, per-ambulance schedules and the
// FIFO queue of waiting emergencies. The batch holds either one emergency
// or the redeployment options of a just-freed ambulance, never both.
struct SystemState {
  double clock = 0.0;
  std::vector<Request> arriving;
  int redeploy_ambulance = -1;  // set iff `arriving` is a redeployment batch
  std::vector<AmbulanceState> ambulances;
  std::deque<Request> fifo;

  const AmbulanceState& ambulance(int id) const {
    for (const auto& a : ambulances) {
      if (a.id == id) return a;
    }
    throw InternalError("unknown ambulance id");
  }
  AmbulanceState& ambulance(int id) {
    return const_cast<AmbulanceState&>(
        static_cast<const SystemState*>(this)->ambulance(id));
  }

  std::vector<int> idle_ambulances() const {
    std::vector<int> out;
    for (const auto& a : ambulances) {
      if (a.idle_at(clock)) out.push_back(a.id);
    }
    return out;
  }

  std::string digest() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    auto mixd = [&](double d) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(d));
      std::memcpy(&bits, &d, sizeof(bits));
      mix(bits);
    };
    mixd(clock);
    for (const auto& a : ambulances) {
      mix(static_cast<std::uint64_t>(a.id));
      mixd(a.free_at());
      mixd(a.location_when_free().lat);
      mixd(a.location_when_free().lon);
    }
    for (const auto& r : fifo) mix(static_cast<std::uint64_t>(r.id));
    for (const auto& r : arriving) mix(static_cast<std::uint64_t>(r.id));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf);
  }
};

/// Action set at a decision state. Emergency arrival: one edge per idle
/// ambulance (empty set means the request joins the queue). Redeployment
/// batch: one edge per waiting location, unless the queue is nonempty, in
/// which case the single queue-head edge is returned as forced.
inline FeasibleActions feasible_actions(const SystemState& x) {
  if (x.arriving.empty()) {
    throw InternalError("feasible_actions: no arriving batch");
  }
  FeasibleActions fa;
  if (x.redeploy_ambulance < 0) {
    // single emergency arrival
    const Request& r = x.arriving.front();
    for (const auto& a : x.ambulances) {
      if (a.idle_at(x.clock)) fa.edges.push_back(Action{a.id, r});
    }
  } else {
    if (!x.fifo.empty()) {
      fa.forced = true;
      fa.edges.push_back(Action{x.redeploy_ambulance, x.fifo.front()});
      return fa;
    }
    for (const auto& r : x.arriving) {
      fa.edges.push_back(Action{x.redeploy_ambulance, r});
    }
  }
  return fa;
}

// What a policy may answer at a decision state. Defer leaves an arriving
// emergency in the queue and is honored only by replay-capable rollouts;
// TakeQueued picks a specific queued request at a freed event.
struct PolicyDecision {
  enum class Kind { Act, Defer, TakeQueued } kind = Kind::Act;
  Action action{};

  static PolicyDecision act(Action a) { return {Kind::Act, std::move(a)}; }
  static PolicyDecision defer() { return {Kind::Defer, {}}; }
  static PolicyDecision take_queued(int amb, std::int64_t request_id) {
    PolicyDecision d;
    d.kind = Kind::TakeQueued;
    d.action.ambulance_id = amb;
    d.action.target.id = request_id;
    return d;
  }
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyDecision decide(const SystemState& x, std::mt19937_64& rng) = 0;
  // Replay policies may defer arrivals and override queue-head forcing.
  // Time-dependent so a warmup handover can switch modes mid-episode.
  virtual bool is_replay(double t) const {
    (void)t;
    return false;
  }
  virtual std::string name() const = 0;
};

struct TraceEvent {
  double t = 0.0;
  EventKind kind = EventKind::EmergencyArrival;
  std::string state_digest;
  std::int64_t request_id = 0;
  int ambulance_id = -1;
  double elapsed_response_s = 0.0;  // emergencies, on dispatch events
};

struct EpisodeTrace {
  std::vector<TraceEvent> events;
  std::vector<AmbulanceState> final_schedules;
  std::size_t served_emergencies = 0;
  std::size_t queued_peak = 0;
  double warmup_s = 0.0;
  double cooldown_s = 0.0;
  double horizon_s = 0.0;

  double sum_elapsed_response_s() const {
    double s = 0.0;
    for (const auto& a : final_schedules) {
      for (const auto& e : a.schedule) {
        if (e.kind == RequestKind::Emergency) s += e.elapsed_response_s();
      }
    }
    return s;
  }
};

// Event-driven engine. Emergencies arrive from the stream; completions
// spawn redeployment batches or forced queue dispatches. At equal
// timestamps emergencies are processed before frees, frees in ambulance
// id order.
class EpisodeEngine {
 public:
  EpisodeEngine(const ScenarioConfig& scenario, std::vector<Request> stream)
      : scenario_(scenario), stream_(std::move(stream)) {
    scenario_.validate();
    sort_requests(stream_);
    for (const auto& r : stream_) {
      if (r.kind != RequestKind::Emergency) {
        throw InputError("episode stream must contain only emergencies");
      }
    }
    const auto init = scenario_.resolved_initial_locations();
    for (int i = 0; i < scenario_.fleet_size; ++i) {
      AmbulanceState a;
      a.id = i;
      a.initial = init[static_cast<std::size_t>(i)];
      state_.ambulances.push_back(std::move(a));
    }
    trace_.warmup_s = scenario_.warmup_s;
    trace_.cooldown_s = scenario_.cooldown_s;
    trace_.horizon_s = scenario_.horizon_s;
  }

  EpisodeTrace run(Policy& policy, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    while (advance(policy, rng)) {
    }
    trace_.final_schedules = state_.ambulances;
    return std::move(trace_);
  }

  const SystemState& state() const { return state_; }

 private:
  struct PendingFree {
    double t;
    int ambulance_id;
    std::size_t schedule_len;  // length when emitted; stale events are skipped
    bool operator>(const PendingFree& o) const {
      if (t != o.t) return t > o.t;
      return ambulance_id > o.ambulance_id;
    }
  };

  // Processes the next event. Returns false once the stream is exhausted,
  // the queue empty and no frees are pending.
  bool advance(Policy& policy, std::mt19937_64& rng) {
    const bool have_arrival = next_arrival_ < stream_.size();
    const bool have_free = !frees_.empty();
    if (!have_arrival && !have_free) return false;

    double t_arr = have_arrival ? stream_[next_arrival_].entry_s : 0.0;
    double t_free = have_free ? frees_.top().t : 0.0;

    // emergency precedence at equal timestamps
    if (have_arrival && (!have_free || t_arr <= t_free)) {
      handle_arrival(stream_[next_arrival_++], policy, rng);
    } else {
      auto ev = frees_.top();
      frees_.pop();
      // Skip events superseded by a later dispatch of the same ambulance.
      if (state_.ambulance(ev.ambulance_id).schedule.size() == ev.schedule_len) {
        handle_free(ev, policy, rng);
      }
    }
    return true;
  }

  void handle_arrival(const Request& r, Policy& policy, std::mt19937_64& rng) {
    state_.clock = std::max(state_.clock, r.entry_s);
    state_.arriving = {r};
    state_.redeploy_ambulance = -1;
    record(EventKind::EmergencyArrival, r.id, -1);

    const auto idle = state_.idle_ambulances();
    if (idle.empty() && !policy.is_replay(state_.clock)) {
      enqueue(r);
      state_.arriving.clear();
      return;
    }
    const PolicyDecision d = policy.decide(state_, rng);
    if (d.kind == PolicyDecision::Kind::Defer) {
      if (!policy.is_replay(state_.clock)) {
        throw InternalError("policy deferred an arrival outside replay");
      }
      enqueue(r);
      state_.arriving.clear();
      return;
    }
    if (d.kind != PolicyDecision::Kind::Act) {
      throw InternalError("unexpected decision kind at arrival");
    }
    validate_dispatch(d.action, r, policy.is_replay(state_.clock));
    dispatch(d.action.ambulance_id, r, EventKind::Dispatch);
    state_.arriving.clear();
  }

  void handle_free(const PendingFree& ev, Policy& policy,
                   std::mt19937_64& rng) {
    state_.clock = std::max(state_.clock, ev.t);
    auto& amb = state_.ambulance(ev.ambulance_id);
    record(EventKind::Freed, amb.schedule.back().request_id, ev.ambulance_id);
    const bool after_emergency =
        amb.schedule.back().kind == RequestKind::Emergency;

    if (policy.is_replay(state_.clock)) {
      if (after_emergency) state_.arriving = redeploy_batch(ev.t);
      state_.redeploy_ambulance = ev.ambulance_id;
      const PolicyDecision d = policy.decide(state_, rng);
      switch (d.kind) {
        case PolicyDecision::Kind::Act:
          if (!after_emergency) {
            throw InternalError("replay re-redeployed an idle ambulance");
          }
          apply_redeploy(ev.ambulance_id, d.action.target);
          break;
        case PolicyDecision::Kind::TakeQueued:
          dispatch_queued(ev.ambulance_id, d.action.target.id);
          break;
        case PolicyDecision::Kind::Defer:
          if (after_emergency) {
            throw InternalError("replay left an ambulance at a drop-off");
          }
          break;  // arrived at a waiting location, nothing planned
      }
      state_.arriving.clear();
      state_.redeploy_ambulance = -1;
      return;
    }

    if (!state_.fifo.empty()) {
      // FIFO principle: the freed ambulance takes the queue head.
      Request head = state_.fifo.front();
      state_.fifo.pop_front();
      dispatch(ev.ambulance_id, head, EventKind::ForcedDispatch);
      return;
    }
    if (!after_emergency) return;  // arrived at a waiting location, idle now

    state_.arriving = redeploy_batch(ev.t);
    state_.redeploy_ambulance = ev.ambulance_id;
    record(EventKind::RedeployBatch, 0, ev.ambulance_id);
    const PolicyDecision d = policy.decide(state_, rng);
    if (d.kind != PolicyDecision::Kind::Act ||
        d.action.ambulance_id != ev.ambulance_id ||
        d.action.target.kind != RequestKind::Redeployment) {
      throw InternalError("policy must pick a redeployment edge");
    }
    apply_redeploy(ev.ambulance_id, d.action.target);
    state_.arriving.clear();
    state_.redeploy_ambulance = -1;
  }

  // Option ids ascend with the waiting-location index so id order and
  // location order coincide in the decision graph.
  std::vector<Request> redeploy_batch(double t) {
    const std::int64_t n =
        static_cast<std::int64_t>(scenario_.waiting_locations.size());
    std::vector<Request> batch;
    for (std::int64_t w = 0; w < n; ++w) {
      Request r;
      r.id = next_redeploy_id_ - (n - 1) + w;
      r.kind = RequestKind::Redeployment;
      r.origin = r.dropoff = scenario_.waiting_locations[static_cast<std::size_t>(w)];
      r.entry_s = t;
      r.service_s = 0.0;
      batch.push_back(std::move(r));
    }
    next_redeploy_id_ -= n;
    return batch;
  }

  void validate_dispatch(const Action& a, const Request& r, bool replay) {
    if (a.target.id != r.id) {
      throw InternalError("decision does not address the arriving request");
    }
    const auto& amb = state_.ambulance(a.ambulance_id);
    if (!replay && !amb.idle_at(state_.clock)) {
      throw InternalError("dispatch of a busy ambulance");
    }
    if (replay && !amb.idle_at(state_.clock)) {
      throw InternalError("replay dispatched a busy ambulance; defer instead");
    }
  }

  void enqueue(const Request& r) {
    state_.fifo.push_back(r);
    trace_.queued_peak = std::max(trace_.queued_peak, state_.fifo.size());
    record(EventKind::Queued, r.id, -1);
  }

  void dispatch(int ambulance_id, const Request& r, EventKind kind) {
    auto& amb = state_.ambulance(ambulance_id);
    const double prev_c = amb.free_at();
    const Location prev_d = amb.location_when_free();
    const Arrival arr = respond(prev_c, prev_d, r, scenario_.speed_kmh);
    ScheduleEntry e;
    e.request_id = r.id;
    e.kind = r.kind;
    e.entry_s = r.entry_s;
    e.dispatch_s = state_.clock;
    e.depart_s = std::max(prev_c, r.entry_s);
    e.response_s = arr.response_s;
    e.completion_s = arr.completion_s;
    e.origin = r.origin;
    e.dropoff = r.dropoff;
    amb.schedule.push_back(e);
    frees_.push(
        PendingFree{arr.completion_s, ambulance_id, amb.schedule.size()});
    if (r.kind == RequestKind::Emergency) ++trace_.served_emergencies;
    TraceEvent te;
    te.t = state_.clock;
    te.kind = kind;
    te.state_digest = state_.digest();
    te.request_id = r.id;
    te.ambulance_id = ambulance_id;
    te.elapsed_response_s = arr.response_s - r.entry_s;
    trace_.events.push_back(std::move(te));
  }

  void dispatch_queued(int ambulance_id, std::int64_t request_id) {
    for (auto it = state_.fifo.begin(); it != state_.fifo.end(); ++it) {
      if (it->id == request_id) {
        Request r = *it;
        state_.fifo.erase(it);
        dispatch(ambulance_id, r, EventKind::ForcedDispatch);
        return;
      }
    }
    throw InternalError("requested queue entry not present");
  }

  void apply_redeploy(int ambulance_id, const Request& target) {
    if (target.kind != RequestKind::Redeployment) {
      throw InternalError("redeploy target must be a redeployment request");
    }
    dispatch(ambulance_id, target, EventKind::Redeploy);
  }

  void record(EventKind kind, std::int64_t request_id, int amb) {
    TraceEvent te;
    te.t = state_.clock;
    te.kind = kind;
    te.state_digest = state_.digest();
    te.request_id = request_id;
    te.ambulance_id = amb;
    trace_.events.push_back(std::move(te));
  }

  ScenarioConfig scenario_;
  std::vector<Request> stream_;
  SystemState state_;
  EpisodeTrace trace_;
  std::size_t next_arrival_ = 0;
  std::priority_queue<PendingFree, std::vector<PendingFree>,
                      std::greater<PendingFree>>
      frees_;
  std::int64_t next_redeploy_id_ = -1;
};

/// Rolls one full episode: every emergency is eventually served, the
/// trace marks warmup/cooldown windows for metric exclusion.
inline EpisodeTrace run_episode(const ScenarioConfig& scenario,
                                const std::vector<Request>& stream,
                                Policy& policy, std::uint64_t seed = 0) {
  EpisodeEngine engine(scenario, stream);
  return engine.run(policy, seed);
}

namespace detail {

inline void apply_dispatch(const ScenarioConfig& scenario, SystemState& x,
                           int ambulance_id, const Request& r) {
  auto& amb = x.ambulance(ambulance_id);
  const Arrival arr =
      respond(amb.free_at(), amb.location_when_free(), r, scenario.speed_kmh);
  ScheduleEntry e;
  e.request_id = r.id;
  e.kind = r.kind;
  e.entry_s = r.entry_s;
  e.dispatch_s = x.clock;
  e.depart_s = std::max(amb.free_at(), r.entry_s);
  e.response_s = arr.response_s;
  e.completion_s = arr.completion_s;
  e.origin = r.origin;
  e.dropoff = r.dropoff;
  amb.schedule.push_back(e);
}

inline std::vector<Request> redeploy_batch_at(const ScenarioConfig& scenario,
                                              double t, std::int64_t base_id) {
  const std::int64_t n =
      static_cast<std::int64_t>(scenario.waiting_locations.size());
  std::vector<Request> batch;
  for (std::int64_t w = 0; w < n; ++w) {
    Request r;
    r.id = base_id - (n - 1) + w;
    r.kind = RequestKind::Redeployment;
    r.origin = r.dropoff = scenario.waiting_locations[static_cast<std::size_t>(w)];
    r.entry_s = t;
    batch.push_back(std::move(r));
  }
  return batch;
}

}  // namespace detail

/// One MDP transition: applies decision `y` at state `x` (empty decision
/// queues the arriving emergency, legal only when no ambulance is idle),
/// then advances the clock through autonomous events until the next
/// decision state. Consumes `incoming` as arrivals materialize. A terminal
/// state has an empty arriving batch.
inline SystemState step(const ScenarioConfig& scenario, SystemState x,
                        const std::optional<Action>& y,
                        std::deque<Request>& incoming) {
  const FeasibleActions fa = feasible_actions(x);
  if (!y.has_value()) {
    if (!fa.edges.empty()) {
      throw InternalError("step: decision required, feasible edges exist");
    }
    x.fifo.push_back(x.arriving.front());
  } else {
    const bool known = [&] {
      for (const auto& e : fa.edges) {
        if (e.ambulance_id == y->ambulance_id && e.target.id == y->target.id)
          return true;
      }
      return false;
    }();
    if (!known) throw InternalError("step: decision not in feasible set");
    if (fa.forced) x.fifo.pop_front();
    detail::apply_dispatch(scenario, x, y->ambulance_id, y->target);
  }
  x.arriving.clear();
  x.redeploy_ambulance = -1;

  // Advance to the next decision state. Frees after a redeployment with an
  // empty queue are silent; an un-redeployed drop-off or a nonempty queue
  // stops at the freed ambulance's batch.
  std::int64_t synth_id = -1000000;  // ids for synthesized redeploy options
  for (;;) {
    int free_amb = -1;
    double t_free = 0.0;
    for (const auto& a : x.ambulances) {
      if (a.schedule.empty()) continue;
      const double c = a.schedule.back().completion_s;
      // A completed drop-off without a follow-up entry is still pending:
      // the redeployment batch has not been offered yet.
      const bool pending =
          c > x.clock || a.schedule.back().kind == RequestKind::Emergency;
      if (!pending) continue;
      const double t_ev = std::max(c, x.clock);
      if (free_amb < 0 || t_ev < t_free || (t_ev == t_free && a.id < free_amb)) {
        free_amb = a.id;
        t_free = t_ev;
      }
    }
    const bool have_arrival = !incoming.empty();
    const double t_arr = have_arrival ? incoming.front().entry_s : 0.0;

    if (!have_arrival && free_amb < 0) return x;  // terminal

    if (have_arrival && (free_amb < 0 || t_arr <= t_free)) {
      Request r = incoming.front();
      incoming.pop_front();
      x.clock = std::max(x.clock, r.entry_s);
      x.arriving = {r};
      x.redeploy_ambulance = -1;
      return x;
    }

    x.clock = std::max(x.clock, t_free);
    auto& amb = x.ambulance(free_amb);
    const bool after_emergency =
        amb.schedule.back().kind == RequestKind::Emergency;
    if (!x.fifo.empty() || after_emergency) {
      x.arriving = detail::redeploy_batch_at(scenario, x.clock, synth_id);
      x.redeploy_ambulance = free_amb;
      return x;
    }
    // arrived at a waiting location, queue empty: keep advancing
  }
}

}  // namespace ems
