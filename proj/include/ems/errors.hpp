#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ems {

// Bad user-supplied data: files, configs, coordinates, flag values.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// A model has no feasible solution; carries the offending entities.
struct InfeasibleError : std::runtime_error {
  std::vector<std::string> unservable;
  explicit InfeasibleError(const std::string& what,
                           std::vector<std::string> items = {})
      : std::runtime_error(what), unservable(std::move(items)) {}
};

// A metric is undefined on the given data (e.g. no emergencies served).
struct MetricError : std::runtime_error {
  explicit MetricError(const std::string& what) : std::runtime_error(what) {}
};

// Broken internal invariant or contract violation between modules.
struct InternalError : std::logic_error {
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace ems
