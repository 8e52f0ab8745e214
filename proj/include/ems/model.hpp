#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ems/errors.hpp"
#include "ems/features.hpp"

namespace ems {

enum class ModelVariant { LR, MLP };
enum class Activation { ReLU, Identity };

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;  // row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return a[static_cast<std::size_t>(r) * cols + c];
  }
};

// Shared per-edge scorer: a linear regression or a small MLP, applied to
// each edge's (retained, standardized) feature row independently.
struct ModelParams {
  ModelVariant variant = ModelVariant::LR;
  // LR
  double intercept = 0.0;
  std::vector<double> coef;
  // MLP; the last layer maps to a single score
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Activation activation = Activation::ReLU;
  // preprocessing, frozen at training time
  std::vector<int> retained;
  FeatureStats stats;

  int input_dim() const {
    return variant == ModelVariant::LR
               ? static_cast<int>(coef.size())
               : (weights.empty() ? 0 : weights.front().cols);
  }

  void validate() const {
    if (variant == ModelVariant::MLP) {
      if (weights.empty() || weights.back().rows != 1) {
        throw InputError("model: MLP must end in a single-score layer");
      }
      for (std::size_t l = 0; l + 1 < weights.size(); ++l) {
        if (weights[l + 1].cols != weights[l].rows) {
          throw InputError("model: layer dimensions do not chain");
        }
      }
      for (std::size_t l = 0; l < weights.size(); ++l) {
        if (static_cast<int>(biases[l].size()) != weights[l].rows) {
          throw InputError("model: bias dimension mismatch");
        }
      }
    }
    if (!retained.empty() &&
        retained.size() != stats.mean.size()) {
      throw InputError("model: standardization stats do not match retained set");
    }
  }
};

inline ModelParams make_lr(int raw_dim) {
  ModelParams p;
  p.variant = ModelVariant::LR;
  p.coef.assign(static_cast<std::size_t>(raw_dim), 0.0);
  return p;
}

/// MLP with the given hidden widths; an empty list yields a bare linear
/// output layer (identical to LR under the Identity activation).
inline ModelParams make_mlp(int raw_dim, const std::vector<int>& hidden,
                            std::uint64_t seed,
                            Activation act = Activation::ReLU) {
  ModelParams p;
  p.variant = ModelVariant::MLP;
  p.activation = act;
  std::mt19937_64 rng(seed);
  int in = raw_dim;
  auto add_layer = [&](int out) {
    Matrix w(out, in);
    const double scale = std::sqrt(2.0 / std::max(in, 1));
    std::normal_distribution<double> init(0.0, scale);
    for (auto& v : w.a) v = init(rng);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(static_cast<std::size_t>(out), 0.0);
    in = out;
  };
  for (int h : hidden) add_layer(h);
  add_layer(1);
  return p;
}

namespace model_detail {

inline double activate(Activation a, double v) {
  return a == Activation::ReLU ? (v > 0.0 ? v : 0.0) : v;
}
inline double activate_grad(Activation a, double pre) {
  return a == Activation::ReLU ? (pre > 0.0 ? 1.0 : 0.0) : 1.0;
}

// Selects retained dimensions and standardizes; identity when the model
// carries no preprocessing (tests, hand-built params).
inline std::vector<double> preprocess(const ModelParams& p,
                                      const std::vector<double>& raw) {
  if (p.retained.empty()) return raw;
  std::vector<double> z(p.retained.size());
  for (std::size_t k = 0; k < p.retained.size(); ++k) {
    const auto idx = static_cast<std::size_t>(p.retained[k]);
    if (idx >= raw.size()) throw InputError("predict: feature row too short");
    z[k] = (raw[idx] - p.stats.mean[k]) / p.stats.stddev[k];
  }
  return z;
}

struct ForwardPass {
  std::vector<std::vector<double>> pre;   // per layer, pre-activation
  std::vector<std::vector<double>> post;  // per layer, post-activation
  double score = 0.0;
};

inline ForwardPass mlp_forward(const ModelParams& p,
                               const std::vector<double>& z) {
  ForwardPass fp;
  std::vector<double> cur = z;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const Matrix& w = p.weights[l];
    if (static_cast<int>(cur.size()) != w.cols) {
      throw InputError("predict: feature dimension mismatch");
    }
    std::vector<double> nxt(static_cast<std::size_t>(w.rows), 0.0);
    for (int r = 0; r < w.rows; ++r) {
      double acc = p.biases[l][static_cast<std::size_t>(r)];
      for (int c = 0; c < w.cols; ++c) {
        acc += w.at(r, c) * cur[static_cast<std::size_t>(c)];
      }
      nxt[static_cast<std::size_t>(r)] = acc;
    }
    fp.pre.push_back(nxt);
    const bool last = l + 1 == p.weights.size();
    if (!last) {
      for (auto& v : nxt) v = activate(p.activation, v);
    }
    fp.post.push_back(nxt);
    cur = std::move(nxt);
  }
  fp.score = cur.front();
  return fp;
}

}  // namespace model_detail

/// Score of a single raw feature row.
inline double predict_one(const ModelParams& p, const std::vector<double>& raw) {
  const auto z = model_detail::preprocess(p, raw);
  if (p.variant == ModelVariant::LR) {
    if (z.size() != p.coef.size()) {
      throw InputError("predict: feature dimension mismatch");
    }
    double acc = p.intercept;
    for (std::size_t k = 0; k < z.size(); ++k) acc += p.coef[k] * z[k];
    return acc;
  }
  return model_detail::mlp_forward(p, z).score;
}

/// Per-edge scores; identical rows get identical scores (shared weights).
inline std::vector<double> predict_theta(
    const ModelParams& p, const std::vector<std::vector<double>>& rows) {
  std::vector<double> theta;
  theta.reserve(rows.size());
  for (const auto& r : rows) theta.push_back(predict_one(p, r));
  return theta;
}

// Gradient of the scores w.r.t. the model weights, same shapes as the
// parameters they refer to.
struct ModelGrad {
  double intercept = 0.0;
  std::vector<double> coef;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  static ModelGrad zeros_like(const ModelParams& p) {
    ModelGrad g;
    g.coef.assign(p.coef.size(), 0.0);
    for (const auto& w : p.weights) g.weights.emplace_back(w.rows, w.cols);
    for (const auto& b : p.biases) g.biases.emplace_back(b.size(), 0.0);
    return g;
  }
};

/// Accumulates d(score)/d(params) * upstream for one edge row.
inline void backprop_one(const ModelParams& p, const std::vector<double>& raw,
                         double upstream, ModelGrad& g) {
  const auto z = model_detail::preprocess(p, raw);
  if (p.variant == ModelVariant::LR) {
    g.intercept += upstream;
    for (std::size_t k = 0; k < z.size(); ++k) g.coef[k] += upstream * z[k];
    return;
  }
  const auto fp = model_detail::mlp_forward(p, z);
  const std::size_t L = p.weights.size();
  std::vector<double> delta = {upstream};  // last layer is linear
  for (std::size_t li = L; li-- > 0;) {
    const Matrix& w = p.weights[li];
    const auto& input = li == 0 ? z : fp.post[li - 1];
    for (int r = 0; r < w.rows; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      g.biases[li][static_cast<std::size_t>(r)] += d;
      for (int c = 0; c < w.cols; ++c) {
        g.weights[li].at(r, c) += d * input[static_cast<std::size_t>(c)];
      }
    }
    if (li == 0) break;
    std::vector<double> prev(static_cast<std::size_t>(w.cols), 0.0);
    for (int c = 0; c < w.cols; ++c) {
      double acc = 0.0;
      for (int r = 0; r < w.rows; ++r) {
        acc += w.at(r, c) * delta[static_cast<std::size_t>(r)];
      }
      prev[static_cast<std::size_t>(c)] =
          acc * model_detail::activate_grad(p.activation,
                                            fp.pre[li - 1][static_cast<std::size_t>(c)]);
    }
    delta = std::move(prev);
  }
}

// First-order adaptive-moment optimizer over the model parameters.
class Adam {
 public:
  Adam(const ModelParams& p, double beta1, double beta2, double eps)
      : m_(ModelGrad::zeros_like(p)),
        v_(ModelGrad::zeros_like(p)),
        beta1_(beta1),
        beta2_(beta2),
        eps_(eps) {}

  void step(ModelParams& p, const ModelGrad& g, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    auto upd = [&](double& param, double& m, double& v, double grad) {
      m = beta1_ * m + (1.0 - beta1_) * grad;
      v = beta2_ * v + (1.0 - beta2_) * grad * grad;
      param -= lr * (m / c1) / (std::sqrt(v / c2) + eps_);
    };
    upd(p.intercept, m_.intercept, v_.intercept, g.intercept);
    for (std::size_t k = 0; k < p.coef.size(); ++k) {
      upd(p.coef[k], m_.coef[k], v_.coef[k], g.coef[k]);
    }
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      for (std::size_t i = 0; i < p.weights[l].a.size(); ++i) {
        upd(p.weights[l].a[i], m_.weights[l].a[i], v_.weights[l].a[i],
            g.weights[l].a[i]);
      }
      for (std::size_t i = 0; i < p.biases[l].size(); ++i) {
        upd(p.biases[l][i], m_.biases[l][i], v_.biases[l][i], g.biases[l][i]);
      }
    }
  }

 private:
  ModelGrad m_, v_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

}  // namespace ems
