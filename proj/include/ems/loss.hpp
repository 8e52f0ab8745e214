#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ems/errors.hpp"
#include "ems/matching.hpp"

namespace ems {

// Gaussian perturbation of the edge scores: amplitude, Monte-Carlo sample
// count and the seed every draw derives from.
struct PerturbConfig {
  double epsilon = 1.0;
  int samples = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > 0.0)) throw InputError("perturb: epsilon must be > 0");
    if (samples < 1) throw InputError("perturb: need at least one sample");
  }
};

struct FyEval {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d theta, per edge
};

namespace loss_detail {

inline void check_y_feasible(const DecisionGraph& g,
                             const std::vector<char>& y) {
  if (y.size() != g.edges.size()) {
    throw InputError("fy loss: label dimension != edge count");
  }
  std::vector<int> ld(static_cast<std::size_t>(g.n_left), 0);
  std::vector<int> rd(static_cast<std::size_t>(g.n_right), 0);
  for (std::size_t e = 0; e < y.size(); ++e) {
    if (!y[e]) continue;
    ld[static_cast<std::size_t>(g.edges[e].left)]++;
    rd[static_cast<std::size_t>(g.edges[e].right)]++;
  }
  for (int i = 0; i < g.n_left; ++i) {
    const auto d = ld[static_cast<std::size_t>(i)];
    if (d > 1 || (g.left_required[static_cast<std::size_t>(i)] && d != 1)) {
      throw InputError("fy loss: infeasible label");
    }
  }
  for (int j = 0; j < g.n_right; ++j) {
    const auto d = rd[static_cast<std::size_t>(j)];
    if (d > 1 || (g.right_required[static_cast<std::size_t>(j)] && d != 1)) {
      throw InputError("fy loss: infeasible label");
    }
  }
}

}  // namespace loss_detail

/// Perturbed Fenchel-Young loss and its theta-gradient in one pass: the
/// sample average of max_y (theta + eps Z)^T y minus theta^T y', and the
/// average argmax minus y'. Identical seeds give identical draws, so the
/// loss and gradient share common random numbers.
inline FyEval fy_loss_and_gradient(const DecisionGraph& g,
                                   const ThetaVector& theta,
                                   const std::vector<char>& y_prime,
                                   const PerturbConfig& cfg) {
  cfg.validate();
  loss_detail::check_y_feasible(g, y_prime);
  if (theta.size() != g.edges.size()) {
    throw InputError("fy loss: theta dimension != edge count");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  FyEval out;
  out.grad.assign(theta.size(), 0.0);
  ThetaVector perturbed(theta.size());
  double acc_max = 0.0;
  for (int m = 0; m < cfg.samples; ++m) {
    for (std::size_t e = 0; e < theta.size(); ++e) {
      perturbed[e] = theta[e] + cfg.epsilon * normal(rng);
    }
    const MatchResult res = solve_matching(g, perturbed, TieRule::Any);
    double value = 0.0;  // value under the perturbed scores
    for (int e : res.selected) value += perturbed[static_cast<std::size_t>(e)];
    acc_max += value;
    for (int e : res.selected) out.grad[static_cast<std::size_t>(e)] += 1.0;
  }
  const double inv = 1.0 / static_cast<double>(cfg.samples);
  double label_score = 0.0;
  for (std::size_t e = 0; e < theta.size(); ++e) {
    if (y_prime[e]) label_score += theta[e];
    out.grad[e] = out.grad[e] * inv - (y_prime[e] ? 1.0 : 0.0);
  }
  out.loss = acc_max * inv - label_score;
  return out;
}

inline double fy_loss(const DecisionGraph& g, const ThetaVector& theta,
                      const std::vector<char>& y_prime,
                      const PerturbConfig& cfg) {
  return fy_loss_and_gradient(g, theta, y_prime, cfg).loss;
}

inline std::vector<double> fy_gradient(const DecisionGraph& g,
                                       const ThetaVector& theta,
                                       const std::vector<char>& y_prime,
                                       const PerturbConfig& cfg) {
  return fy_loss_and_gradient(g, theta, y_prime, cfg).grad;
}

}  // namespace ems
