#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>

#include "sbof/codebook.hpp"

using namespace sbof;

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, int dim, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(dim, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST_CASE("one cluster is the mean") {
  std::mt19937_64 rng(1);
  auto x = gaussian(rng, 6, 300);
  auto cb = train_codebook(x, {1, 9, 100, 1e-4});
  REQUIRE(cb.size() == 1);
  CHECK((cb.bases.col(0) - x.rowwise().mean()).norm() < 1e-12);
}

TEST_CASE("duplicated points are recovered exactly") {
  Eigen::MatrixXd distinct(2, 3);
  distinct << 0, 10, -5,
              0, 3, 7;
  Eigen::MatrixXd x(2, 30);
  for (int i = 0; i < 30; ++i) x.col(i) = distinct.col(i % 3);
  auto cb = train_codebook(x, {3, 4, 100, 1e-4});
  for (int j = 0; j < 3; ++j) {
    double best = 1e9;
    for (int c = 0; c < 3; ++c) best = std::min(best, (cb.bases.col(c) - distinct.col(j)).norm());
    CHECK(best == 0.0);
  }
}

TEST_CASE("inertia never increases") {
  std::mt19937_64 rng(2);
  for (int d = 0; d < 10; ++d) {
    auto x = gaussian(rng, 8, 400);
    KMeansReport rep;
    train_codebook(x, {12, static_cast<std::uint64_t>(d), 100, 0.0}, &rep);
    REQUIRE(rep.inertia.size() >= 2);
    for (std::size_t i = 1; i < rep.inertia.size(); ++i) {
      CHECK(rep.inertia[i] <= rep.inertia[i - 1] * (1 + 1e-12));
    }
  }
}

TEST_CASE("fewer descriptors than clusters reduces K") {
  std::mt19937_64 rng(3);
  auto x = gaussian(rng, 4, 5);
  KMeansReport rep;
  auto cb = train_codebook(x, {200, 1, 100, 1e-4}, &rep);
  CHECK(rep.reduced_k);
  CHECK(cb.size() == 5);
  CHECK_THROWS_AS(train_codebook(Eigen::MatrixXd(4, 0)), std::invalid_argument);
}

TEST_CASE("training is deterministic for a seed") {
  std::mt19937_64 rng(4);
  auto x = gaussian(rng, 16, 500);
  auto a = train_codebook(x, {20, 77, 50, 1e-4});
  auto b = train_codebook(x, {20, 77, 50, 1e-4});
  CHECK(a.bases == b.bases);
}

TEST_CASE("knn ties go to the lower index") {
  Codebook cb;
  cb.bases.resize(1, 4);
  cb.bases << 1, -1, 3, -1;
  auto nn = knn(Eigen::VectorXd::Zero(1), cb, 3);
  CHECK(nn == std::vector<int>{0, 1, 3});
  CHECK_THROWS_AS(knn(Eigen::VectorXd::Zero(1), cb, 5), std::invalid_argument);
}

TEST_CASE("knn agrees with a full sort") {
  std::mt19937_64 rng(5);
  Codebook cb{gaussian(rng, 10, 60), 0};
  auto q = gaussian(rng, 10, 1000);
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::pair<double, int>> all;
    for (int j = 0; j < 60; ++j) all.emplace_back((cb.bases.col(j) - q.col(i)).squaredNorm(), j);
    std::sort(all.begin(), all.end());
    auto got = knn(q.col(i), cb, 5);
    for (int j = 0; j < 5; ++j) REQUIRE(got[j] == all[j].second);
  }
  auto labels = assign_nearest(q, cb.bases);
  for (int i = 0; i < 1000; ++i) REQUIRE(labels[i] == knn(q.col(i), cb, 1)[0]);
}

TEST_CASE("subsample keeps original order") {
  Eigen::MatrixXd x(1, 50);
  for (int i = 0; i < 50; ++i) x(0, i) = i;
  CHECK(subsample_columns(x, 80, 1) == x);
  auto s = subsample_columns(x, 20, 9);
  REQUIRE(s.cols() == 20);
  for (int i = 1; i < 20; ++i) CHECK(s(0, i) > s(0, i - 1));
  CHECK(subsample_columns(x, 20, 9) == s);
  CHECK(subsample_columns(x, 20, 10) != s);
}

TEST_CASE("codebook file round trip") {
  std::mt19937_64 rng(6);
  Codebook cb{gaussian(rng, 128, 7), 123};
  save_codebook(cb, "cb_roundtrip.bin");
  auto back = load_codebook("cb_roundtrip.bin");
  CHECK(back.bases == cb.bases);
  CHECK(back.seed == 123);
  std::remove("cb_roundtrip.bin");
  CHECK_THROWS(load_codebook("does_not_exist.bin"));
}
