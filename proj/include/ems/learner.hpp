#pragma once

#include "ems/dataset.hpp"
#include "ems/features.hpp"
#include "ems/loss.hpp"
#include "ems/model.hpp"
#include "ems/train.hpp"

#include "ems/benchmarks.hpp"

namespace ems {

// Pipeline policy: featurize the decision graph, score edges with the
// statistical model, commit the max-weight matching.
class LearnedPolicy : public Policy {
 public:
  LearnedPolicy(ScenarioConfig scenario, ModelParams params, FeatureContext ctx,
                std::string label = "learned")
      : scenario_(std::move(scenario)),
        params_(std::move(params)),
        ctx_(std::move(ctx)),
        label_(std::move(label)) {
    params_.validate();
  }

  PolicyDecision decide(const SystemState& x, std::mt19937_64&) override {
    const DecisionGraph g = build_decision_graph(x);
    std::vector<std::vector<double>> rows;
    rows.reserve(g.edges.size());
    for (const auto& e : g.edges) {
      const Action a{e.ambulance_id, e.target};
      const auto f = edge_features(scenario_, x, a, ctx_);
      rows.emplace_back(f.begin(), f.end());
    }
    const ThetaVector theta = predict_theta(params_, rows);
    const MatchResult res = solve_matching(g, theta);
    if (res.selected.size() != 1) {
      throw InternalError("learned policy: expected exactly one edge");
    }
    const auto& edge = g.edges[static_cast<std::size_t>(res.selected.front())];
    return PolicyDecision::act(Action{edge.ambulance_id, edge.target});
  }

  std::string name() const override { return label_; }

 private:
  ScenarioConfig scenario_;
  ModelParams params_;
  FeatureContext ctx_;
  std::string label_;
};

}  // namespace ems
