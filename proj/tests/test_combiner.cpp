#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <random>

#include "sbof/combiner.hpp"

using namespace sbof;

namespace {

struct Problem {
  Eigen::MatrixXd features;
  Eigen::MatrixXd owa;
};

// Three methods; which one is best depends on the sign of feature 0.
Problem synthetic(std::uint64_t seed, int n, int d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 0.3);
  Problem p{Eigen::MatrixXd(n, d), Eigen::MatrixXd(n, 3)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) p.features(i, j) = g(rng);
    const int best = p.features(i, 0) < -0.4 ? 0 : (p.features(i, 0) < 0.4 ? 1 : 2);
    for (int m = 0; m < 3; ++m) p.owa(i, m) = (m == best ? 0.5 : 1.5) + u(rng);
  }
  return p;
}

}  // namespace

TEST_CASE("softmax") {
  CHECK(softmax(Eigen::VectorXd::Zero(4)).isApprox(Eigen::VectorXd::Constant(4, 0.25)));
  Eigen::Vector3d p(std::log(1.0), std::log(2.0), std::log(3.0));
  CHECK(softmax(p).isApprox(Eigen::Vector3d(1.0 / 6, 2.0 / 6, 3.0 / 6), 1e-14));
  CHECK((softmax(p) - softmax(Eigen::Vector3d(p.array() + 812.5))).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(softmax(Eigen::Vector2d(1e4, -1e4)).allFinite());
}

TEST_CASE("loss and gradient closed forms") {
  Eigen::Vector3d o(0.2, 1.0, 2.4);
  auto g = softmax_gradient(Eigen::Vector3d::Zero(), o);
  CHECK(g.isApprox((o.array() - o.mean()).matrix() / 3.0));
  Eigen::Vector3d c = Eigen::Vector3d::Constant(0.9);
  Eigen::Vector3d p(0.3, -2.0, 1.1);
  CHECK(softmax_gradient(p, c).isZero(1e-15));
  CHECK(softmax_loss(p, c) == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("gradient and Hessian match finite differences") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::uniform_int_distribution<int> msize(2, 9);
  double worst_g = 0.0, worst_h = 0.0;
  for (int r = 0; r < 1000; ++r) {
    const int m = msize(rng);
    Eigen::VectorXd p(m), o(m);
    for (int i = 0; i < m; ++i) p[i] = g(rng), o[i] = u(rng);
    const auto grad = softmax_gradient(p, o);
    const auto hess = softmax_hessian_diag(p, o);
    const double step = 1e-5;
    const double scale_g = std::max(grad.cwiseAbs().maxCoeff(), 1e-4);
    const double scale_h = std::max(hess.cwiseAbs().maxCoeff(), 1e-3);
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd a = p, b = p;
      a[i] += step;
      b[i] -= step;
      const double fd = (softmax_loss(a, o) - softmax_loss(b, o)) / (2 * step);
      worst_g = std::max(worst_g, std::abs(fd - grad[i]) / scale_g);
      const double fd2 = (softmax_gradient(a, o)[i] - softmax_gradient(b, o)[i]) / (2 * step);
      worst_h = std::max(worst_h, std::abs(fd2 - hess[i]) / scale_h);
    }
    const double l = softmax_loss(p, o);
    CHECK(l >= o.minCoeff());
    CHECK(l <= o.maxCoeff());
  }
  CHECK(worst_g <= 1e-6);
  CHECK(worst_h <= 1e-5);
}

TEST_CASE("two methods with a fixed winner") {
  Problem p = synthetic(2, 60, 3);
  p.owa.col(0).setZero();
  p.owa.col(1).setOnes();
  p.owa.conservativeResize(Eigen::NoChange, 2);
  HyperParams hp;
  hp.learning_rate = 0.3;
  hp.rounds = 200;
  auto model = train_weight_model(p.features, p.owa, hp, 1);
  CHECK(mean_weighted_loss(model.predict_batch(p.features), p.owa) <= 0.05);
  CHECK(model.train_loss.back() <= 0.05);
}

TEST_CASE("separable binary feature") {
  std::mt19937_64 rng(3);
  const int n = 100;
  Eigen::MatrixXd f(n, 2), o(n, 2);
  for (int i = 0; i < n; ++i) {
    const bool a = i % 2 == 0;
    f(i, 0) = a ? 1.0 : 0.0;
    f(i, 1) = std::uniform_real_distribution<double>(0, 1)(rng);
    o.row(i) = a ? Eigen::RowVector2d(0.0, 1.0) : Eigen::RowVector2d(1.0, 0.0);
  }
  HyperParams hp;
  hp.learning_rate = 0.3;
  hp.rounds = 100;
  auto model = train_weight_model(f, o, hp, 5);
  const double uniform = mean_weighted_loss(Eigen::MatrixXd::Constant(n, 2, 0.5), o);
  CHECK(mean_weighted_loss(model.predict_batch(f), o) <= 0.1 * uniform);
}

TEST_CASE("zero rounds and degenerate features give uniform weights") {
  Problem p = synthetic(4, 40, 5);
  HyperParams hp;
  hp.rounds = 0;
  auto zero = train_weight_model(p.features, p.owa, hp, 1);
  CHECK(zero.rounds.empty());
  CHECK(zero.predict_batch(p.features).isApprox(Eigen::MatrixXd::Constant(40, 3, 1.0 / 3)));

  hp.rounds = 20;
  auto flat = train_weight_model(Eigen::MatrixXd::Constant(40, 5, 2.5), p.owa, hp, 1);
  CHECK(flat.rounds.empty());
  CHECK(flat.predict_weights(p.features.row(0)).isApprox(Eigen::VectorXd::Constant(3, 1.0 / 3)));
}

TEST_CASE("training input validation") {
  Problem p = synthetic(5, 20, 2);
  HyperParams hp;
  CHECK_THROWS_AS(train_weight_model(p.features.topRows(9), p.owa.topRows(9), hp, 1), std::invalid_argument);
  CHECK_THROWS_AS(train_weight_model(p.features, p.owa.leftCols(1), hp, 1), std::invalid_argument);
  CHECK_THROWS_AS(train_weight_model(p.features, p.owa.topRows(19), hp, 1), std::invalid_argument);
  Eigen::MatrixXd neg = p.owa;
  neg(3, 1) = -0.1;
  CHECK_THROWS_AS(train_weight_model(p.features, neg, hp, 1), std::invalid_argument);
  hp.max_depth = 5;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp.max_depth = 6;
  hp.learning_rate = 2.0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}

TEST_CASE("full-data training loss never increases") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    Problem p = synthetic(10 + s, 150, 4);
    HyperParams hp;
    hp.learning_rate = 0.05;
    hp.rounds = 100;
    auto model = train_weight_model(p.features, p.owa, hp, s);
    REQUIRE(model.train_loss.size() == 101);
    for (std::size_t r = 1; r < model.train_loss.size(); ++r) {
      CHECK(model.train_loss[r] <= model.train_loss[r - 1] + 1e-12);
    }
  }
}

TEST_CASE("weights are probability vectors, batch equals single") {
  Problem p = synthetic(6, 120, 4);
  HyperParams hp;
  hp.subsample_rows = 0.7;
  hp.subsample_cols = 0.6;
  hp.rounds = 30;
  hp.learning_rate = 0.2;
  auto model = train_weight_model(p.features, p.owa, hp, 3);
  auto w = model.predict_batch(p.features);
  for (int i = 0; i < 120; ++i) {
    CHECK(std::abs(w.row(i).sum() - 1.0) <= 1e-12);
    CHECK((w.row(i).array() >= 0.0).all());
    CHECK(model.predict_weights(p.features.row(i)) == w.row(i).transpose());
    const double l = w.row(i).dot(p.owa.row(i));
    CHECK(l >= p.owa.row(i).minCoeff() - 1e-12);
    CHECK(l <= p.owa.row(i).maxCoeff() + 1e-12);
  }
  CHECK_THROWS_AS(model.predict_batch(p.features.leftCols(3)), std::invalid_argument);
}

TEST_CASE("training is deterministic and independent of thread count") {
  Problem p = synthetic(7, 200, 6);
  HyperParams hp;
  hp.subsample_rows = 0.8;
  hp.subsample_cols = 0.5;
  hp.rounds = 25;
  BoostingOptions one, four;
  four.threads = 4;
  auto a = train_weight_model(p.features, p.owa, hp, 11, one);
  auto b = train_weight_model(p.features, p.owa, hp, 11, four);
  CHECK(a.predict_batch(p.features) == b.predict_batch(p.features));
  CHECK(a.train_loss == b.train_loss);
  auto c = train_weight_model(p.features, p.owa, hp, 12, one);
  CHECK(a.predict_batch(p.features) != c.predict_batch(p.features));
}

TEST_CASE("adding a constant to every loss leaves the weights unchanged") {
  Problem p = synthetic(8, 150, 4);
  HyperParams hp;
  hp.rounds = 40;
  hp.learning_rate = 0.1;
  auto a = train_weight_model(p.features, p.owa, hp, 2);
  Eigen::MatrixXd shifted = p.owa.array() + 3.0;
  auto b = train_weight_model(p.features, shifted, hp, 2);
  CHECK((a.predict_batch(p.features) - b.predict_batch(p.features)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(b.train_loss.back() == doctest::Approx(a.train_loss.back() + 3.0).epsilon(1e-9));
}

TEST_CASE("model file round trip") {
  Problem p = synthetic(9, 80, 3);
  HyperParams hp;
  hp.rounds = 15;
  hp.subsample_rows = 0.9;
  auto model = train_weight_model(p.features, p.owa, hp, 4);
  save_weight_model(model, "model_roundtrip.bin");
  auto back = load_weight_model("model_roundtrip.bin");
  std::remove("model_roundtrip.bin");
  CHECK(back.methods == 3);
  CHECK(back.features == 3);
  CHECK(back.seed == 4);
  CHECK(back.rounds.size() == model.rounds.size());
  CHECK(back.train_loss == model.train_loss);
  CHECK(back.predict_batch(p.features) == model.predict_batch(p.features));
  CHECK_THROWS(load_weight_model("missing_model.bin"));
}

TEST_CASE("feature binning") {
  Eigen::MatrixXd f(6, 2);
  f << 1, 0,
       2, 0,
       2, 0,
       3, 0,
       5, 0,
       1, 0;
  auto bins = bin_features(f);
  CHECK(bins.cuts[0] == std::vector<double>{1.5, 2.5, 4.0});
  CHECK(bins.cuts[1].empty());
  CHECK(int(bins.codes(4, 0)) == 3);
  CHECK(int(bins.codes(0, 0)) == 0);

  Eigen::MatrixXd wide(2000, 1);
  for (int i = 0; i < 2000; ++i) wide(i, 0) = i;
  auto many = bin_features(wide, 256);
  CHECK(many.cuts[0].size() <= 255);
  CHECK(std::is_sorted(many.cuts[0].begin(), many.cuts[0].end()));
}

TEST_CASE("combine_forecasts") {
  Eigen::MatrixXd fc(3, 4);
  fc << 1, 2, 3, 4,
        5, 6, 7, 8,
        -1, 0, 9, 2;
  CHECK(combine_forecasts(Eigen::Vector3d(0, 1, 0), fc) == fc.row(1).transpose());
  CHECK(combine_forecasts(Eigen::Vector2d(0.5, 0.5), fc.topRows(2)).isApprox(Eigen::Vector4d(3, 4, 5, 6)));
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  for (int r = 0; r < 500; ++r) {
    Eigen::MatrixXd f(4, 6);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = g(rng);
    Eigen::VectorXd p(4);
    for (auto& v : p) v = 3.0 * g(rng);
    auto c = combine_forecasts(softmax(p), f);
    for (int t = 0; t < 6; ++t) {
      CHECK(c[t] >= f.col(t).minCoeff() - 1e-12);
      CHECK(c[t] <= f.col(t).maxCoeff() + 1e-12);
    }
  }
}

TEST_CASE("cross-validated search") {
  Problem p = synthetic(11, 100, 3);
  SearchSpace space;
  space.depth_hi = 8;
  space.rounds_hi = 20;
  auto zero = cv_search(p.features, p.owa, space, 5, 0, 1);
  CHECK(zero.selected == -1);
  CHECK(zero.best.rounds == HyperParams{}.rounds);

  auto single = cv_search(p.features, p.owa, space, 5, 1, 1);
  REQUIRE(single.configs.size() == 1);
  CHECK(single.selected == 0);
  CHECK(single.best.describe() == single.configs[0].describe());

  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto r = cv_search(p.features, p.owa, space, 5, 6, seed);
    REQUIRE(r.configs.size() == 6);
    auto sorted = r.mean_loss;
    std::sort(sorted.begin(), sorted.end());
    CHECK(r.mean_loss[r.selected] <= sorted[2]);
    CHECK(r.mean_loss[r.selected] == sorted.front());
    for (const auto& c : r.configs) CHECK_NOTHROW(c.validate());
    auto again = cv_search(p.features, p.owa, space, 5, 6, seed);
    CHECK(again.mean_loss == r.mean_loss);
  }
}
