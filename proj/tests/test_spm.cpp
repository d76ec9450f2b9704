#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <random>

#include "sbof/spm.hpp"

using namespace sbof;

namespace {

struct Sample {
  std::vector<LlcCode> codes;
  std::vector<Keypoint> keypoints;
};

Sample random_sample(std::mt19937_64& rng, int n, int k_bases) {
  std::uniform_real_distribution<double> pos(0.0, 128.0), coef(-0.5, 1.5);
  std::uniform_int_distribution<int> idx(0, k_bases - 1);
  Sample s;
  for (int i = 0; i < n; ++i) {
    LlcCode c;
    while (c.indices.size() < 5) {
      const int j = idx(rng);
      if (std::find(c.indices.begin(), c.indices.end(), j) == c.indices.end()) c.indices.push_back(j);
    }
    c.coefficients.resize(5);
    for (auto& v : c.coefficients) v = coef(rng);
    s.codes.push_back(c);
    Keypoint kp;
    kp.x = pos(rng);
    kp.y = pos(rng);
    s.keypoints.push_back(kp);
  }
  return s;
}

}  // namespace

TEST_CASE("region ids") {
  CHECK(region_ids(0, 0, 128) == std::array<int, 3>{0, 1, 5});
  CHECK(region_ids(64, 64, 128) == std::array<int, 3>{0, 4, 15});
  CHECK(region_ids(63.999, 63.999, 128) == std::array<int, 3>{0, 1, 10});
  CHECK(region_ids(100, 10, 128) == std::array<int, 3>{0, 2, 8});
  CHECK(region_ids(128, 128, 128) == std::array<int, 3>{0, 4, 20});
}

TEST_CASE("each level partitions the keypoints") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(0.0, 128.0);
  std::array<int, kPyramidRegions> count{};
  for (int i = 0; i < 5000; ++i) {
    for (int r : region_ids(pos(rng), pos(rng), 128)) ++count[r];
  }
  int l1 = 0, l2 = 0;
  for (int r = 1; r < 5; ++r) l1 += count[r];
  for (int r = 5; r < 21; ++r) l2 += count[r];
  CHECK(count[0] == 5000);
  CHECK(l1 == 5000);
  CHECK(l2 == 5000);
}

TEST_CASE("no descriptors give a zero vector") {
  auto f = pool("z", {}, {}, 200, 128);
  CHECK(f.values.size() == 4200);
  CHECK(f.values.isZero(0.0));
  CHECK_THROWS_AS(pool_codes({LlcCode{}}, {}, 200, 128), std::invalid_argument);
}

TEST_CASE("single descriptor lands in three regions") {
  LlcCode c;
  c.indices = {3, 0, 7};
  c.coefficients = Eigen::Vector3d(0.7, 0.5, -0.2);
  Keypoint kp;
  kp.x = 100;
  kp.y = 10;
  auto v = pool_codes({c}, {kp}, 10, 128);
  REQUIRE(v.size() == 210);
  Eigen::VectorXd dense = Eigen::VectorXd::Zero(10);
  dense[3] = 0.7;
  dense[0] = 0.5;
  dense[7] = -0.2;
  for (int r = 0; r < kPyramidRegions; ++r) {
    Eigen::VectorXd block = v.segment(r * 10, 10);
    if (r == 0 || r == 2 || r == 8) {
      CHECK(block == dense);
    } else {
      CHECK(block.isZero(0.0));
    }
  }
  auto a = pool_codes({c}, {kp}, 10, 128, PoolingMode::Absolute);
  CHECK(a.segment(0, 10) == dense.cwiseAbs());
}

TEST_CASE("adding a descriptor never lowers an occupied region") {
  std::mt19937_64 rng(2);
  for (int r = 0; r < 50; ++r) {
    auto s = random_sample(rng, 30, 20);
    auto before = pool_codes(s.codes, s.keypoints, 20, 128);
    auto extra = random_sample(rng, 1, 20);
    s.codes.push_back(extra.codes[0]);
    s.keypoints.push_back(extra.keypoints[0]);
    auto after = pool_codes(s.codes, s.keypoints, 20, 128);
    const auto ids = region_ids(extra.keypoints[0].x, extra.keypoints[0].y, 128);
    for (int reg = 0; reg < kPyramidRegions; ++reg) {
      const bool touched = std::find(ids.begin(), ids.end(), reg) != ids.end();
      Eigen::VectorXd b = before.segment(reg * 20, 20), a = after.segment(reg * 20, 20);
      if (!touched) {
        CHECK(a == b);
      } else if (!b.isZero(0.0)) {
        CHECK((a.array() >= b.array()).all());
      }
    }
  }
}

TEST_CASE("whole-image region is the max of the quadrants for absolute codes") {
  std::mt19937_64 rng(3);
  for (int r = 0; r < 50; ++r) {
    auto s = random_sample(rng, 40, 20);
    auto v = pool_codes(s.codes, s.keypoints, 20, 128, PoolingMode::Absolute);
    Eigen::VectorXd q = v.segment(20, 20);
    for (int reg = 2; reg < 5; ++reg) q = q.cwiseMax(v.segment(reg * 20, 20));
    CHECK(q == v.segment(0, 20));
    Eigen::VectorXd fine = v.segment(5 * 20, 20);
    for (int reg = 6; reg < 21; ++reg) fine = fine.cwiseMax(v.segment(reg * 20, 20));
    CHECK(fine == v.segment(0, 20));
  }
}

TEST_CASE("pooling ignores descriptor order") {
  std::mt19937_64 rng(4);
  auto s = random_sample(rng, 60, 30);
  auto v = pool_codes(s.codes, s.keypoints, 30, 128);
  std::vector<int> perm(60);
  for (int i = 0; i < 60; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  Sample p;
  for (int i : perm) {
    p.codes.push_back(s.codes[i]);
    p.keypoints.push_back(s.keypoints[i]);
  }
  CHECK(pool_codes(p.codes, p.keypoints, 30, 128) == v);
}

TEST_CASE("feature file round trip") {
  std::mt19937_64 rng(5);
  FeatureFile f;
  f.k_bases = 10;
  for (int i = 0; i < 4; ++i) {
    auto s = random_sample(rng, 10, 10);
    f.records.push_back(pool("s" + std::to_string(i), s.codes, s.keypoints, 10, 128));
  }
  write_feature_file(f, "feat_roundtrip.bin");
  auto back = read_feature_file("feat_roundtrip.bin");
  std::remove("feat_roundtrip.bin");
  REQUIRE(back.records.size() == 4);
  CHECK(back.k_bases == 10);
  CHECK(back.regions == 21);
  for (int i = 0; i < 4; ++i) {
    CHECK(back.records[i].series_id == f.records[i].series_id);
    CHECK(back.records[i].values == f.records[i].values);
  }
  auto m = feature_matrix(back);
  CHECK(m.rows() == 4);
  CHECK(m.cols() == 210);
  CHECK(m.row(2).transpose() == f.records[2].values.cast<double>());

  f.records[1].values.resize(5);
  CHECK_THROWS_AS(write_feature_file(f, "feat_bad.bin"), std::invalid_argument);
  std::remove("feat_bad.bin");
}
