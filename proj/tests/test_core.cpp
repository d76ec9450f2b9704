#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "sbof/core.hpp"

using namespace sbof;

namespace {

Eigen::VectorXd seq(int from, int to) {
  Eigen::VectorXd v(to - from + 1);
  for (int i = from; i <= to; ++i) v[i - from] = i;
  return v;
}

// Direct transcription of the 90% ACF limit, independent of acf().
bool seasonal_oracle(const Eigen::VectorXd& y, int m) {
  const auto n = y.size();
  if (m <= 1 || n < 3 * m) return false;
  const double mean = y.mean();
  double denom = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) denom += (y[t] - mean) * (y[t] - mean);
  if (denom <= 0.0) return false;
  auto rho = [&](int k) {
    double s = 0.0;
    for (Eigen::Index t = k; t < n; ++t) s += (y[t] - mean) * (y[t - k] - mean);
    return s / denom;
  };
  double acc = 0.0;
  for (int i = 1; i < m; ++i) acc += rho(i) * rho(i);
  const double limit = 1.645 * std::sqrt((1.0 + 2.0 * acc) / static_cast<double>(n));
  return std::abs(rho(m)) > limit;
}

}  // namespace

TEST_CASE("corpus lines parse with quotes and trailing empties") {
  auto a = parse_corpus_line("Y1,5,10,15", 1);
  CHECK(a.id == "Y1");
  CHECK(a.values == std::vector<double>{5, 10, 15});
  auto b = parse_corpus_line("Y2,1,2,,,", 2);
  CHECK(b.values == std::vector<double>{1, 2});
  auto c = parse_corpus_line("\"Q7\",\"1.5\",\"2\"", 3);
  CHECK(c.id == "Q7");
  CHECK(c.values == std::vector<double>{1.5, 2});
}

TEST_CASE("non-numeric observation names line and column") {
  std::istringstream in("A,1,2,3\nB,1,zz,3\n");
  try {
    read_raw_corpus(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 3);
  }
}

TEST_CASE("lenient reader collects malformed rows") {
  std::istringstream in("A,1,2,3\nB,1,zz,3\nC,4,5\n");
  std::vector<CorpusRejection> rejected;
  auto rows = read_raw_corpus(in, &rejected);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].id == "C");
  REQUIRE(rejected.size() == 1);
  CHECK(rejected[0].line == 2);
  CHECK(rejected[0].id == "B");
}

TEST_CASE("M4 header line is skipped, file order preserved") {
  std::istringstream in("\"V1\",\"V2\",\"V3\"\n\"Y1\",1,2\n\"Y2\",3,4,5\n");
  auto s = load_corpus(in, 1, 1);
  REQUIRE(s.size() == 2);
  CHECK(s[0].id == "Y1");
  CHECK(s[1].values.size() == 3);
}

TEST_CASE("series shorter than two are rejected with their id") {
  std::istringstream in("Y1,5\n");
  try {
    load_corpus(in, 1, 1);
    FAIL("expected SeriesError");
  } catch (const SeriesError& e) {
    CHECK(e.id() == "Y1");
  }
  CHECK_THROWS_AS(make_series("x", 0, 1, seq(1, 5)), SeriesError);
  CHECK_THROWS_AS(make_series("x", 1, 0, seq(1, 5)), SeriesError);
  Eigen::VectorXd bad = seq(1, 5);
  bad[2] = std::nan("");
  CHECK_THROWS_AS(make_series("x", 1, 1, bad), SeriesError);
}

TEST_CASE("metadata with optional group column") {
  std::istringstream in("id,period,horizon,group\nA,12,18,Monthly\nB,1,6,\n");
  auto meta = load_metadata(in);
  CHECK(meta.at("A").period == 12);
  CHECK(meta.at("A").horizon == 18);
  CHECK(meta.at("A").group == "Monthly");
  CHECK(meta.at("B").group.empty());
  std::istringstream bad("name,period,horizon\n");
  CHECK_THROWS_AS(load_metadata(bad), ParseError);
}

TEST_CASE("frequency groups from metadata, id prefix, then period") {
  CHECK(frequency_group("Y12", 1) == "Yearly");
  CHECK(frequency_group("H3", 24) == "Hourly");
  CHECK(frequency_group("foo", 12) == "Monthly");
  CHECK(frequency_group("foo", 3) == "Other");
  CHECK(frequency_group("Y12", 1, "Custom") == "Custom");
}

TEST_CASE("split_train_test") {
  auto s = make_series("s", 1, 2, seq(1, 10));
  auto split = split_train_test(s);
  CHECK(split.train.values == seq(1, 8));
  CHECK(split.test == seq(9, 10));

  auto short_series = make_series("t", 1, 2, seq(1, 3));
  CHECK_THROWS_AS(split_train_test(short_series), SeriesError);
  auto seasonal = make_series("u", 4, 2, seq(1, 6));
  CHECK_THROWS_AS(split_train_test(seasonal), SeriesError);
  CHECK_THROWS_AS(split_train_test(make_series("v", 1, 5, seq(1, 5))), SeriesError);
}

TEST_CASE("split then concatenate reproduces the series") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(8, 80), hor(1, 6);
  std::normal_distribution<double> g;
  for (int r = 0; r < 1000; ++r) {
    const int n = len(rng), h = hor(rng);
    Eigen::VectorXd v(n);
    for (auto& x : v) x = g(rng);
    auto split = split_train_test(make_series("r", 1, h, v));
    Eigen::VectorXd joined(n);
    joined << split.train.values, split.test;
    REQUIRE(joined == v);
  }
}

TEST_CASE("seasonality test") {
  Eigen::VectorXd sine(120);
  for (int t = 0; t < 120; ++t) sine[t] = std::sin(2.0 * M_PI * t / 12.0);
  CHECK(seasonality_test(sine, 12));
  CHECK_FALSE(seasonality_test(sine, 1));
  CHECK_FALSE(seasonality_test(sine.head(30), 12));  // n < 3m

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  int negatives = 0, agree = 0;
  for (int r = 0; r < 1000; ++r) {
    Eigen::VectorXd w(200);
    for (auto& x : w) x = g(rng);
    const bool got = seasonality_test(w, 12);
    negatives += !got;
    agree += got == seasonal_oracle(w, 12);
  }
  CHECK(negatives >= 850);
  CHECK(agree == 1000);
}

TEST_CASE("seasonality test is invariant to positive scaling") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int r = 0; r < 200; ++r) {
    Eigen::VectorXd y(48);
    for (int t = 0; t < 48; ++t) y[t] = 5.0 + std::sin(t * 1.5708) * (r % 3) + g(rng);
    CHECK(seasonality_test(y, 4) == seasonality_test(Eigen::VectorXd(y * 37.5), 4));
  }
}

TEST_CASE("decomposition recovers multiplicative factors") {
  const double c[4] = {0.8, 1.2, 0.9, 1.1};
  Eigen::VectorXd y(40);
  for (int t = 0; t < 40; ++t) y[t] = 10.0 * c[t % 4];
  auto d = seasonal_decompose(make_series("s", 4, 4, y));
  REQUIRE(d.kind == SeasonalKind::Multiplicative);
  for (int k = 0; k < 4; ++k) CHECK(d.factors[k] == doctest::Approx(c[k]).epsilon(1e-6));
  CHECK(d.factors.mean() == doctest::Approx(1.0).epsilon(1e-12));
  // Adjusted series times factors reproduces the input.
  auto back = d.reseasonalize(d.adjusted.values, 0);
  CHECK((back - y).cwiseAbs().maxCoeff() <= 1e-9 * y.cwiseAbs().maxCoeff());
}

TEST_CASE("non-seasonal series keeps unit factors") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::VectorXd y(40);
  for (auto& v : y) v = 50.0 + g(rng);
  auto s = make_series("n", 4, 4, y);
  REQUIRE_FALSE(seasonality_test(s));
  auto d = seasonal_decompose(s);
  CHECK(d.kind == SeasonalKind::None);
  CHECK(d.adjusted.values == s.values);
  CHECK((d.factors.array() == 1.0).all());
}

TEST_CASE("non-positive seasonal data falls back to additive") {
  Eigen::VectorXd y(48);
  const double c[4] = {-3, 2, -1, 2};
  for (int t = 0; t < 48; ++t) y[t] = c[t % 4] + 0.01 * t;
  auto d = seasonal_decompose(make_series("a", 4, 4, y));
  CHECK(d.fell_back());
  CHECK(std::abs(d.factors.mean()) < 1e-12);
  auto back = d.reseasonalize(d.adjusted.values, 0);
  CHECK((back - y).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("adjusted seasonal series passes below the test limit") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 0.3);
  int below = 0;
  for (int r = 0; r < 50; ++r) {
    Eigen::VectorXd y(72);
    for (int t = 0; t < 72; ++t) y[t] = (20.0 + 0.05 * t) * (1.0 + 0.3 * std::sin(2 * M_PI * t / 12.0)) + g(rng);
    auto d = seasonal_decompose(make_series("s", 12, 6, y));
    REQUIRE(d.kind == SeasonalKind::Multiplicative);
    below += !seasonality_test(d.adjusted.values, 12);
  }
  CHECK(below == 50);
}
