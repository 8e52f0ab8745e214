#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ems/core.hpp"
#include "ems/errors.hpp"
#include "ems/offline.hpp"
#include "ems/simulator.hpp"

namespace ems {

// Fixed home station per ambulance; stations must be waiting locations.
using HomeBaseMap = std::map<int, Location>;

namespace policy_detail {

inline PolicyDecision closest_idle_dispatch(const ScenarioConfig& scenario,
                                            const SystemState& x) {
  const Request& r = x.arriving.front();
  int best = -1;
  double best_tau = 0.0;
  for (const auto& a : x.ambulances) {
    if (!a.idle_at(x.clock)) continue;
    const double tau = scenario.travel_s(a.location_when_free(), r.origin);
    if (best < 0 || tau < best_tau) {
      best = a.id;
      best_tau = tau;
    }
  }
  if (best < 0) throw InternalError("dispatch requested with no idle vehicle");
  return PolicyDecision::act(Action{best, r});
}

}  // namespace policy_detail

// Closest-idle dispatching, dynamic redeployment to the closest waiting
// location. Ties break on the smaller identifier.
class CicsPolicy : public Policy {
 public:
  explicit CicsPolicy(ScenarioConfig scenario) : scenario_(std::move(scenario)) {}

  PolicyDecision decide(const SystemState& x, std::mt19937_64&) override {
    if (x.redeploy_ambulance < 0) {
      return policy_detail::closest_idle_dispatch(scenario_, x);
    }
    const Location from =
        x.ambulance(x.redeploy_ambulance).location_when_free();
    const Request* best = nullptr;
    double best_tau = 0.0;
    for (const auto& opt : x.arriving) {  // batch is in location-id order
      const double tau = scenario_.travel_s(from, opt.origin);
      if (best == nullptr || tau < best_tau) {
        best = &opt;
        best_tau = tau;
      }
    }
    return PolicyDecision::act(Action{x.redeploy_ambulance, *best});
  }

  std::string name() const override { return "cics"; }

 private:
  ScenarioConfig scenario_;
};

// Closest-idle dispatching, static redeployment to the vehicle's home base.
class CifsPolicy : public Policy {
 public:
  CifsPolicy(ScenarioConfig scenario, const HomeBaseMap& bases)
      : scenario_(std::move(scenario)) {
    for (const auto& [amb, loc] : bases) {
      int w = -1;
      for (std::size_t i = 0; i < scenario_.waiting_locations.size(); ++i) {
        if (scenario_.waiting_locations[i] == loc) {
          w = static_cast<int>(i);
          break;
        }
      }
      if (w < 0) {
        throw InputError("cifs: home base is not a waiting location");
      }
      base_index_[amb] = w;
    }
  }

  PolicyDecision decide(const SystemState& x, std::mt19937_64&) override {
    if (x.redeploy_ambulance < 0) {
      return policy_detail::closest_idle_dispatch(scenario_, x);
    }
    const auto it = base_index_.find(x.redeploy_ambulance);
    if (it == base_index_.end()) {
      throw InputError("cifs: ambulance has no home base");
    }
    // batch order equals waiting-location order
    const auto& opt = x.arriving[static_cast<std::size_t>(it->second)];
    return PolicyDecision::act(Action{x.redeploy_ambulance, opt});
  }

  std::string name() const override { return "cifs"; }

 private:
  ScenarioConfig scenario_;
  std::unordered_map<int, int> base_index_;
};

// Uniform choice among the feasible edges; one of the deliberately
// non-optimal rollout policies.
class RandomPolicy : public Policy {
 public:
  PolicyDecision decide(const SystemState& x, std::mt19937_64& rng) override {
    const FeasibleActions fa = feasible_actions(x);
    if (fa.edges.empty()) {
      throw InternalError("random policy called with no feasible edge");
    }
    std::uniform_int_distribution<std::size_t> pick(0, fa.edges.size() - 1);
    return PolicyDecision::act(fa.edges[pick(rng)]);
  }

  std::string name() const override { return "random"; }
};

// Replays a full-information solution decision by decision. Arrivals whose
// designated vehicle is still busy are deferred; freed vehicles follow
// their plan (park, or pick their queued request).
class ReplayPolicy : public Policy {
 public:
  explicit ReplayPolicy(const OfflineSolution& sol) {
    for (const auto& plan : sol.plans) {
      cursors_[plan.ambulance_id] = 0;
      plans_[plan.ambulance_id] = plan.steps;
      for (const auto& s : plan.steps) {
        if (s.kind == PlanStep::Kind::Serve) {
          owner_[s.request_id] = plan.ambulance_id;
        }
      }
    }
  }

  PolicyDecision decide(const SystemState& x, std::mt19937_64&) override {
    if (x.redeploy_ambulance < 0) {
      const Request& r = x.arriving.front();
      const auto it = owner_.find(r.id);
      if (it == owner_.end()) {
        throw InputError("replay: request not covered by the solution");
      }
      const int amb = it->second;
      if (!x.ambulance(amb).idle_at(x.clock)) return PolicyDecision::defer();
      const PlanStep* next = peek(amb);
      if (next == nullptr || next->kind != PlanStep::Kind::Serve ||
          next->request_id != r.id) {
        // the plan parks the vehicle first; serve once it reaches the post
        return PolicyDecision::defer();
      }
      pop(amb);
      return PolicyDecision::act(Action{amb, r});
    }

    const int amb = x.redeploy_ambulance;
    const PlanStep* next = peek(amb);
    if (next == nullptr) return PolicyDecision::defer();
    if (next->kind == PlanStep::Kind::Redeploy) {
      if (x.arriving.empty()) {
        throw InternalError("replay: redeploy planned but no options offered");
      }
      pop(amb);
      const auto& opt =
          x.arriving[static_cast<std::size_t>(next->waiting_index)];
      return PolicyDecision::act(Action{amb, opt});
    }
    // direct continuation: the planned request must already be queued
    for (const auto& q : x.fifo) {
      if (q.id == next->request_id) {
        pop(amb);
        return PolicyDecision::take_queued(amb, q.id);
      }
    }
    return PolicyDecision::defer();
  }

  bool is_replay(double) const override { return true; }
  std::string name() const override { return "optimal_replay"; }

 private:
  const PlanStep* peek(int amb) const {
    const auto it = plans_.find(amb);
    if (it == plans_.end()) return nullptr;
    const std::size_t cur = cursors_.at(amb);
    return cur < it->second.size() ? &it->second[cur] : nullptr;
  }
  void pop(int amb) { cursors_[amb]++; }

  std::unordered_map<int, std::vector<PlanStep>> plans_;
  std::unordered_map<int, std::size_t> cursors_;
  std::unordered_map<std::int64_t, int> owner_;
};

/// Replay policy over the given full-information solution.
inline ReplayPolicy optimal_replay(const OfflineSolution& sol) {
  return ReplayPolicy(sol);
}

// Optimal replay during the warmup window, the evaluated policy
// afterwards; gives every policy the same post-warmup system state.
class WarmupHandover : public Policy {
 public:
  WarmupHandover(ReplayPolicy warmup, Policy& inner, double warmup_s)
      : warmup_(std::move(warmup)), inner_(inner), warmup_s_(warmup_s) {}

  PolicyDecision decide(const SystemState& x, std::mt19937_64& rng) override {
    if (x.clock < warmup_s_) return warmup_.decide(x, rng);
    return inner_.decide(x, rng);
  }

  bool is_replay(double t) const override { return t < warmup_s_; }
  std::string name() const override { return inner_.name() + "+warmup"; }

 private:
  ReplayPolicy warmup_;
  Policy& inner_;
  double warmup_s_;
};

}  // namespace ems
