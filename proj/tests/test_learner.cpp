#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ems/learner.hpp"
#include "test_util.hpp"

using namespace ems;

namespace {

// two mutually exclusive edges (one required request slot) is the
// canonical toy polytope: exactly one edge wins
DecisionGraph exclusive_edges(int n) {
  DecisionGraph g;
  g.n_left = n;
  g.n_right = 1;
  g.left_required.assign(static_cast<std::size_t>(n), 0);
  g.right_required = {1};
  for (int i = 0; i < n; ++i) {
    g.left_ambulance.push_back(i);
    g.edges.push_back(DecisionEdge{i, 0, i, Request{}});
  }
  g.right_request = {0};
  return g;
}

// E[max(a + eZ1, b + eZ2)] for independent standard normals
double closed_form_max_two(double a, double b, double eps) {
  const double sd = eps * std::sqrt(2.0);
  const double d = (a - b) / sd;
  auto Phi = [](double v) { return 0.5 * std::erfc(-v / std::sqrt(2.0)); };
  const double phi = std::exp(-0.5 * d * d) / std::sqrt(2.0 * kPi);
  return a * Phi(d) + b * Phi(-d) + sd * phi;
}

}  // namespace

TEST_CASE("fy loss matches closed forms on the exclusive pair") {
  const DecisionGraph g = exclusive_edges(2);

  SECTION("unperturbed limit at the matched argmax") {
    PerturbConfig cfg{1e-9, 1, 42};
    const double loss = fy_loss(g, {1.0, 0.0}, {1, 0}, cfg);
    CHECK_THAT(loss, Catch::Matchers::WithinAbs(0.0, 1e-6));
  }
  SECTION("unperturbed limit off the argmax") {
    PerturbConfig cfg{1e-9, 1, 42};
    const double loss = fy_loss(g, {0.0, 1.0}, {1, 0}, cfg);
    CHECK_THAT(loss, Catch::Matchers::WithinAbs(1.0, 1e-6));
  }
  SECTION("standard normal max at the origin") {
    PerturbConfig cfg{1.0, 100000, 7};
    const double expect = 1.0 / std::sqrt(kPi);  // E[max(Z1, Z2)]
    // MC standard error of max(Z1,Z2) is below 1/sqrt(M)
    const double se = 1.0 / std::sqrt(static_cast<double>(cfg.samples));
    const double loss = fy_loss(g, {0.0, 0.0}, {1, 0}, cfg);
    CHECK_THAT(loss, Catch::Matchers::WithinAbs(expect, 3.0 * se));
  }
  SECTION("gradient at the origin is (-1/2, 1/2) around the label") {
    PerturbConfig cfg{1.0, 100000, 11};
    const auto grad = fy_gradient(g, {0.0, 0.0}, {1, 0}, cfg);
    const double se = 0.5 / std::sqrt(static_cast<double>(cfg.samples));
    CHECK_THAT(grad[0], Catch::Matchers::WithinAbs(-0.5, 3.0 * se));
    CHECK_THAT(grad[1], Catch::Matchers::WithinAbs(0.5, 3.0 * se));
  }
  SECTION("matched argmax with tiny amplitude has ~zero gradient") {
    PerturbConfig cfg{1e-6, 200, 3};
    const auto grad = fy_gradient(g, {2.0, 0.0}, {1, 0}, cfg);
    CHECK_THAT(grad[0], Catch::Matchers::WithinAbs(0.0, 1e-9));
    CHECK_THAT(grad[1], Catch::Matchers::WithinAbs(0.0, 1e-9));
  }
  SECTION("loss and gradient share draws under one seed") {
    PerturbConfig cfg{1.0, 64, 99};
    const auto both = fy_loss_and_gradient(g, {0.3, -0.2}, {1, 0}, cfg);
    CHECK(fy_loss(g, {0.3, -0.2}, {1, 0}, cfg) == both.loss);
    CHECK(fy_gradient(g, {0.3, -0.2}, {1, 0}, cfg) == both.grad);
  }
  SECTION("infeasible label is rejected") {
    PerturbConfig cfg{1.0, 4, 0};
    CHECK_THROWS_AS(fy_loss(g, {0.0, 0.0}, {1, 1}, cfg), InputError);
  }
}

TEST_CASE("fy loss properties") {
  SECTION("nonnegative up to MC noise, convex along chords") {
    std::mt19937_64 rng(555);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int it = 0; it < 40; ++it) {
      const double t1a = u(rng), t1b = u(rng), t2a = u(rng), t2b = u(rng);
      auto exact = [&](double a, double b) {
        return closed_form_max_two(a, b, 1.0) - a;  // label = first edge
      };
      CHECK(exact(t1a, t1b) >= -1e-12);
      const double lam = 0.37;
      const double mid = exact(lam * t1a + (1 - lam) * t2a,
                               lam * t1b + (1 - lam) * t2b);
      CHECK(mid <= lam * exact(t1a, t1b) + (1 - lam) * exact(t2a, t2b) + 1e-12);
    }
  }
  SECTION("MC estimate tracks the closed form") {
    PerturbConfig cfg{1.0, 20000, 17};
    const DecisionGraph g = exclusive_edges(2);
    const double est = fy_loss(g, {0.7, -0.4}, {1, 0}, cfg);
    const double exact = closed_form_max_two(0.7, -0.4, 1.0) - 0.7;
    CHECK_THAT(est, Catch::Matchers::WithinAbs(exact, 0.05));
  }
  SECTION("finite differences agree with the gradient under common draws") {
    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int it = 0; it < 8; ++it) {
      const DecisionGraph g = exclusive_edges(3);
      ThetaVector theta = {u(rng), u(rng), u(rng)};
      const std::vector<char> label = {0, 1, 0};
      PerturbConfig cfg{1.0, 10000, 1000 + static_cast<std::uint64_t>(it)};
      const auto grad = fy_gradient(g, theta, label, cfg);
      const double h = 0.05;
      double err2 = 0.0, ref2 = 0.0;
      for (std::size_t k = 0; k < theta.size(); ++k) {
        ThetaVector up = theta, dn = theta;
        up[k] += h;
        dn[k] -= h;
        const double fd =
            (fy_loss(g, up, label, cfg) - fy_loss(g, dn, label, cfg)) /
            (2.0 * h);
        err2 += (fd - grad[k]) * (fd - grad[k]);
        ref2 += fd * fd;
      }
      CHECK(std::sqrt(err2) <= 0.05 * std::sqrt(ref2) + 1e-9);
    }
  }
}

TEST_CASE("predictors") {
  SECTION("constant LR scores everything alike") {
    ModelParams lr = make_lr(3);
    lr.intercept = 4.5;
    const auto theta = predict_theta(lr, {{1, 2, 3}, {9, 9, 9}});
    CHECK(theta[0] == 4.5);
    CHECK(theta[1] == 4.5);
  }
  SECTION("zero-weight relu MLP scores zero") {
    ModelParams mlp = make_mlp(4, {8}, 1);
    for (auto& w : mlp.weights) std::fill(w.a.begin(), w.a.end(), 0.0);
    CHECK(predict_one(mlp, {1, 2, 3, 4}) == 0.0);
  }
  SECTION("LR dot product by hand") {
    ModelParams lr = make_lr(3);
    lr.intercept = 0.5;
    lr.coef = {1.0, -2.0, 0.25};
    const std::vector<double> row = {2.0, 1.0, 4.0};
    CHECK(predict_one(lr, row) == 0.5 + 2.0 - 2.0 + 1.0);
  }
  SECTION("single linear layer equals LR") {
    ModelParams lr = make_lr(3);
    lr.intercept = -0.3;
    lr.coef = {0.2, 1.1, -0.7};
    ModelParams mlp = make_mlp(3, {}, 0, Activation::Identity);
    mlp.biases[0][0] = lr.intercept;
    for (int c = 0; c < 3; ++c) {
      mlp.weights[0].at(0, c) = lr.coef[static_cast<std::size_t>(c)];
    }
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int it = 0; it < 50; ++it) {
      const std::vector<double> row = {u(rng), u(rng), u(rng)};
      CHECK_THAT(predict_one(mlp, row),
                 Catch::Matchers::WithinAbs(predict_one(lr, row), 1e-12));
    }
  }
  SECTION("dimension mismatch is an error") {
    ModelParams lr = make_lr(3);
    CHECK_THROWS_AS(predict_one(lr, {1.0}), InputError);
  }
  SECTION("backprop matches numeric derivatives") {
    ModelParams mlp = make_mlp(3, {5, 4}, 9);
    const std::vector<double> row = {0.3, -1.2, 0.8};
    ModelGrad g = ModelGrad::zeros_like(mlp);
    backprop_one(mlp, row, 1.0, g);
    const double h = 1e-6;
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
      for (std::size_t i = 0; i < mlp.weights[l].a.size(); i += 3) {
        ModelParams up = mlp, dn = mlp;
        up.weights[l].a[i] += h;
        dn.weights[l].a[i] -= h;
        const double fd = (predict_one(up, row) - predict_one(dn, row)) / (2 * h);
        CHECK_THAT(g.weights[l].a[i], Catch::Matchers::WithinAbs(fd, 1e-5));
      }
    }
  }
}

TEST_CASE("correlation filter") {
  std::mt19937_64 rng(31337);
  std::normal_distribution<double> n(0.0, 1.0);
  SECTION("duplicate and negated columns are dropped") {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 100; ++i) {
      const double a = n(rng), b = n(rng);
      rows.push_back({a, b, a, -b});
    }
    const auto res = correlation_filter(rows);
    CHECK(res.kept == std::vector<int>{0, 1});
  }
  SECTION("independent columns all retained") {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 1000; ++i) {
      rows.push_back({n(rng), n(rng), n(rng), n(rng)});
    }
    const auto res = correlation_filter(rows);
    CHECK(res.kept.size() == 4);
    CHECK(res.zero_variance.empty());
  }
  SECTION("zero-variance column kept but flagged") {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 50; ++i) rows.push_back({n(rng), 3.0});
    const auto res = correlation_filter(rows);
    CHECK(res.kept == std::vector<int>{0, 1});
    CHECK(res.zero_variance == std::vector<int>{1});
  }
  SECTION("needs two samples") {
    CHECK_THROWS_AS(correlation_filter({{1.0, 2.0}}), InputError);
  }
}

namespace {

// toy set: the label is always the cheapest-travel edge; feature 0 is the
// travel time, the rest is noise
std::vector<TrainingPoint> separable_toy(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> tau(60.0, 1200.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<TrainingPoint> out;
  for (int i = 0; i < n; ++i) {
    TrainingPoint pt;
    pt.graph = exclusive_edges(3);
    int best = 0;
    double best_tau = 1e18;
    for (int e = 0; e < 3; ++e) {
      const double t = tau(rng);
      pt.features.push_back({t, noise(rng), noise(rng)});
      if (t < best_tau) {
        best_tau = t;
        best = e;
      }
    }
    pt.y_prime.assign(3, 0);
    pt.y_prime[static_cast<std::size_t>(best)] = 1;
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace

TEST_CASE("training") {
  SECTION("zero learning rate leaves weights untouched") {
    std::mt19937_64 rng(2);
    auto points = separable_toy(rng, 10);
    ModelParams init = make_lr(3);
    init.coef = {0.5, -0.5, 0.25};
    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.learning_rate = 0.0;
    tcfg.validation_fraction = 0.0;
    PerturbConfig pcfg{1.0, 8, 5};
    const auto out = train(points, init, tcfg, pcfg);
    CHECK(out.coef == init.coef);
    CHECK(out.intercept == init.intercept);
  }
  SECTION("descent on an already matched label does not increase the loss") {
    std::mt19937_64 rng(3);
    auto points = separable_toy(rng, 1);
    ModelParams init = make_lr(3);
    init.retained = {0, 1, 2};
    init.stats.mean = {0, 0, 0};
    init.stats.stddev = {1, 1, 1};
    init.coef = {-1.0, 0.0, 0.0};  // already reproduces the label
    TrainConfig tcfg;
    tcfg.epochs = 10;
    tcfg.validation_fraction = 0.0;
    PerturbConfig pcfg{1.0, 32, 7};
    std::vector<std::size_t> all = {0};
    const double before = train_detail::dataset_loss(points, all, init, pcfg);
    const auto out = train(points, init, tcfg, pcfg);
    const double after = train_detail::dataset_loss(points, all, out, pcfg);
    CHECK(after <= before + 1e-9);
  }
  SECTION("separable toy set is learned by LR") {
    std::mt19937_64 rng(4);
    auto points = separable_toy(rng, 300);
    auto held_out = separable_toy(rng, 200);
    TrainConfig tcfg;
    tcfg.epochs = 60;
    tcfg.seed = 1;
    PerturbConfig pcfg{1.0, 30, 2};
    const auto params = train(points, make_lr(0), tcfg, pcfg);
    int agree = 0;
    for (const auto& pt : held_out) {
      const auto theta = predict_theta(params, pt.features);
      const auto res = solve_matching(pt.graph, theta);
      REQUIRE(res.selected.size() == 1);
      if (pt.y_prime[static_cast<std::size_t>(res.selected[0])]) ++agree;
    }
    CHECK(agree >= 190);  // 95 percent
  }
  SECTION("empty dataset is rejected") {
    TrainConfig tcfg;
    PerturbConfig pcfg;
    CHECK_THROWS_AS(train({}, make_lr(3), tcfg, pcfg), InputError);
  }
}
