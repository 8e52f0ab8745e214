#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ems/dataset.hpp"
#include "ems/errors.hpp"
#include "ems/log.hpp"
#include "ems/loss.hpp"
#include "ems/model.hpp"

namespace ems {

struct TrainConfig {
  int epochs = 250;
  double learning_rate = 0.001;
  int batch_size = 1;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (epochs < 1) throw InputError("train: epochs must be >= 1");
    if (!(learning_rate >= 0.0)) throw InputError("train: bad learning rate");
    if (batch_size < 1) throw InputError("train: batch size must be >= 1");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
      throw InputError("train: validation fraction in [0,1)");
    }
  }
};

namespace train_detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b) {
  std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
  h ^= a + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  h ^= b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

inline double dataset_loss(const std::vector<TrainingPoint>& points,
                           const std::vector<std::size_t>& idx,
                           const ModelParams& params, const PerturbConfig& pcfg) {
  if (idx.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i : idx) {
    const auto& pt = points[i];
    PerturbConfig cfg = pcfg;
    cfg.seed = mix_seed(pcfg.seed, 0xeba1u, i);  // frozen draws per point
    const auto theta = predict_theta(params, pt.features);
    acc += fy_loss(pt.graph, theta, pt.y_prime, cfg);
  }
  return acc / static_cast<double>(idx.size());
}

}  // namespace train_detail

/// Stochastic gradient descent with adaptive moments on the perturbed
/// loss; the loss gradient in theta is chained through the predictor by
/// hand. Standardization and the correlation filter are fitted on the
/// training split only. Returns the snapshot with the best validation
/// loss (best training loss when no split is held out).
inline ModelParams train(const std::vector<TrainingPoint>& points,
                         ModelParams params, const TrainConfig& tcfg,
                         const PerturbConfig& pcfg) {
  tcfg.validate();
  pcfg.validate();
  if (points.empty()) throw InputError("train: empty dataset");
  for (const auto& pt : points) pt.validate();

  std::mt19937_64 rng(tcfg.seed);
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = std::min(
      points.size() - 1,
      static_cast<std::size_t>(std::llround(
          tcfg.validation_fraction * static_cast<double>(points.size()))));
  std::vector<std::size_t> val_idx(order.begin(),
                                   order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val),
                                     order.end());

  // fit preprocessing on the training split when the caller has not
  if (params.retained.empty()) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i : train_idx) {
      for (const auto& r : points[i].features) rows.push_back(r);
    }
    if (rows.size() < 2) throw InputError("train: too few rows for stats");
    const auto filter = correlation_filter(rows);
    params.retained = filter.kept;
    std::vector<std::vector<double>> kept_rows;
    kept_rows.reserve(rows.size());
    for (const auto& r : rows) {
      std::vector<double> z;
      for (int k : filter.kept) z.push_back(r[static_cast<std::size_t>(k)]);
      kept_rows.push_back(std::move(z));
    }
    params.stats = compute_feature_stats(kept_rows);
    const int dim = static_cast<int>(params.retained.size());
    if (params.variant == ModelVariant::LR &&
        static_cast<int>(params.coef.size()) != dim) {
      params.coef.assign(static_cast<std::size_t>(dim), 0.0);
    }
    if (params.variant == ModelVariant::MLP && params.input_dim() != dim) {
      throw InputError("train: MLP input width != retained feature count");
    }
  }
  params.validate();

  Adam adam(params, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps);
  ModelParams best = params;
  double best_val = train_detail::dataset_loss(
      points, val_idx.empty() ? train_idx : val_idx, params, pcfg);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    ModelGrad grad = ModelGrad::zeros_like(params);
    int in_batch = 0;
    for (std::size_t pos = 0; pos < train_idx.size(); ++pos) {
      const auto& pt = points[train_idx[pos]];
      PerturbConfig cfg = pcfg;
      cfg.seed = train_detail::mix_seed(
          pcfg.seed, static_cast<std::uint64_t>(epoch) + 1, train_idx[pos]);
      const auto theta = predict_theta(params, pt.features);
      const FyEval eval = fy_loss_and_gradient(pt.graph, theta, pt.y_prime, cfg);
      if (!std::isfinite(eval.loss)) {
        throw InternalError("train: non-finite loss at epoch " +
                            std::to_string(epoch));
      }
      epoch_loss += eval.loss;
      for (std::size_t e = 0; e < pt.features.size(); ++e) {
        if (eval.grad[e] != 0.0) {
          backprop_one(params, pt.features[e], eval.grad[e], grad);
        }
      }
      if (++in_batch == tcfg.batch_size || pos + 1 == train_idx.size()) {
        adam.step(params, grad, tcfg.learning_rate);
        grad = ModelGrad::zeros_like(params);
        in_batch = 0;
      }
    }
    const double val_loss = train_detail::dataset_loss(
        points, val_idx.empty() ? train_idx : val_idx, params, pcfg);
    if (!std::isfinite(val_loss)) {
      throw InternalError("train: non-finite validation loss");
    }
    if (val_loss < best_val) {
      best_val = val_loss;
      best = params;
    }
    log::debug("epoch " + std::to_string(epoch) + " train_loss " +
               std::to_string(epoch_loss /
                              std::max<std::size_t>(train_idx.size(), 1)) +
               " val_loss " + std::to_string(val_loss));
  }
  return best;
}

}  // namespace ems
