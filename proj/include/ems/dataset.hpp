#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ems/matching.hpp"

namespace ems {

// One imitation-learning example: the decision graph observed at an
// epoch, raw feature rows per edge, and the reference decision.
struct TrainingPoint {
  DecisionGraph graph;
  std::vector<std::vector<double>> features;  // per edge, raw order
  std::vector<char> y_prime;                  // per edge

  enum class Source { OptimalRollout, SuboptimalRollout };
  Source source = Source::OptimalRollout;
  std::string policy_id;      // suboptimal rollouts: which policy drove here
  double decision_time_s = 0;
  int scenario_index = -1;

  void validate() const {
    if (features.size() != graph.edges.size() ||
        y_prime.size() != graph.edges.size()) {
      throw InputError("training point: rows and labels must match edges");
    }
  }
};

}  // namespace ems
