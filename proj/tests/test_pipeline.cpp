#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sbof/pipeline.hpp"

using namespace sbof;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sbof_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Quarterly-style series: trend, seasonality and noise in varying mixes.
void write_corpus(const fs::path& dir, int count, bool corrupt_row) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  std::ofstream corpus(dir / "train.csv");
  std::ofstream meta(dir / "meta.csv");
  meta << "id,period,horizon\n";
  for (int i = 0; i < count; ++i) {
    const std::string id = "Q" + std::to_string(i + 1);
    corpus << id;
    double level = 100.0 + 5.0 * i;
    const double slope = (i % 3 - 1) * 0.8, amp = (i % 2) * 6.0;
    for (int t = 0; t < 80; ++t) {
      level += slope + g(rng);
      corpus << ',' << level + amp * std::sin(t * M_PI / 2.0);
    }
    corpus << '\n';
    meta << id << ",4,4\n";
    if (corrupt_row && i == 4) corpus << "QBAD,1,2,oops,4\n";
  }
}

RunConfig toy_config(const fs::path& data, const fs::path& work) {
  RunConfig cfg;
  cfg.corpus = (data / "train.csv").string();
  cfg.metadata = (data / "meta.csv").string();
  cfg.work_dir = work.string();
  cfg.codebook_k = 200;
  cfg.kmeans_iters = 20;
  cfg.hyper.rounds = 10;
  cfg.hyper.learning_rate = 0.1;
  cfg.methods = {"naive", "snaive", "rw_drift", "theta"};
  return cfg;
}

}  // namespace

TEST_CASE("toy corpus gives one full-length record per series") {
  const auto dir = scratch("toy");
  write_corpus(dir, 10, false);
  auto cfg = toy_config(dir, dir / "work");
  auto summary = cmd_featurize(cfg);
  CHECK(summary["ok"] == 10);
  const auto train = read_feature_file((dir / "work" / files::kFeaturesTrain).string());
  const auto test = read_feature_file((dir / "work" / files::kFeaturesTest).string());
  REQUIRE(train.records.size() == 10);
  REQUIRE(test.records.size() == 10);
  for (const auto& r : test.records) {
    CHECK(r.values.size() == 4200);
    CHECK(r.values.allFinite());
  }
  CHECK(fs::exists(dir / "work" / files::kCodebook));
}

TEST_CASE("a corrupt row is skipped, the rest is processed") {
  const auto dir = scratch("corrupt");
  write_corpus(dir, 10, true);
  auto summary = cmd_featurize(toy_config(dir, dir / "work"));
  CHECK(summary["ok"] == 10);
  CHECK(summary["skipped"] == 1);
  CHECK(summary["skipped_series"][0]["id"] == "QBAD");
}

TEST_CASE("series that cannot be split are skipped with a reason") {
  const auto dir = scratch("short");
  write_corpus(dir, 10, false);
  {
    std::ofstream corpus(dir / "train.csv", std::ios::app);
    corpus << "QSHORT,1,2,3,4,5\n";
    std::ofstream meta(dir / "meta.csv", std::ios::app);
    meta << "QSHORT,4,4\n";
  }
  auto cases = prepare_cases(toy_config(dir, dir / "work"));
  CHECK(cases.cases.size() == 10);
  REQUIRE(cases.skipped.size() == 1);
  CHECK(cases.skipped[0].id == "QSHORT");
  CHECK_FALSE(cases.skipped[0].reason.empty());
}

TEST_CASE("full run is reproducible byte for byte") {
  const auto dir = scratch("repro");
  write_corpus(dir, 24, false);
  const std::vector<std::string> outputs = {files::kCodebook, files::kFeaturesTrain, files::kFeaturesTest,
                                            files::kForecastsTrain, files::kForecastsTest, files::kLossesTrain,
                                            files::kModelIndex, files::kLossCurve, files::kWeightsTest,
                                            files::kReportCsv, files::kReportText};
  std::vector<std::string> first;
  for (int run = 0; run < 2; ++run) {
    auto cfg = toy_config(dir, dir / ("work" + std::to_string(run)));
    cfg.threads = run == 0 ? 1 : 3;
    cmd_featurize(cfg);
    cmd_forecast(cfg);
    cmd_train(cfg);
    auto eval = cmd_evaluate(cfg);
    CHECK(std::abs(eval["total"]["naive2"]["owa"].get<double>() - 1.0) <= 1e-9);
    CHECK(eval["total"].contains(kCombinationId));
    for (const auto& name : outputs) {
      const auto path = cfg.work_dir / fs::path(name);
      REQUIRE(fs::exists(path));
      if (run == 0) {
        first.push_back(slurp(path));
      } else {
        INFO(name);
        CHECK(slurp(path) == first[&name - outputs.data()]);
      }
    }
  }
  const std::string report = slurp(dir / "work0" / files::kReportCsv);
  CHECK(report.rfind("method,Yearly_sMAPE,Yearly_MASE,Yearly_OWA,Quarterly_sMAPE", 0) == 0);
  CHECK(report.find("\ncombination,") != std::string::npos);

  const auto model = fs::path(dir / "work0" / "model_Quarterly.bin");
  CHECK(fs::exists(model));
}

TEST_CASE("principal component projection") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (auto [n, d] : {std::pair{50, 8}, std::pair{6, 30}}) {
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    x.col(1) *= 4.0;
    x.col(3) *= 2.5;
    auto p = pca_project(x);
    CHECK((p.axes.transpose() * p.axes - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 1e-9);
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / double(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const auto ev = es.eigenvalues();
    CHECK(p.variances[0] == doctest::Approx(ev[d - 1]).epsilon(1e-9));
    CHECK(p.variances[1] == doctest::Approx(ev[d - 2]).epsilon(1e-9));
    CHECK((p.points - centered * p.axes).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(p.points.col(0).dot(p.points.col(1))) <= 1e-8 * p.points.squaredNorm());
  }
  auto single = pca_project(Eigen::MatrixXd::Constant(1, 5, 3.0));
  CHECK(single.points.isZero(0.0));
}

TEST_CASE("command line interface") {
  const char* cli = std::getenv("SBOF_CLI");
  if (cli == nullptr) {
    MESSAGE("SBOF_CLI not set; skipping");
    return;
  }
  const auto dir = scratch("cli");
  const std::string out = (dir / "out.txt").string(), err = (dir / "err.txt").string();
  const std::string base = std::string("\"") + cli + "\" ";

  CHECK(std::system((base + "print-config --set codebook.k=64 > " + out).c_str()) == 0);
  std::istringstream printed(slurp(out));
  auto cfg = parse_config(printed);
  CHECK(cfg.codebook_k == 64);

  const int bad = std::system((base + "print-config --set codebook.kk=1 > " + out + " 2> " + err).c_str());
  CHECK(bad != 0);
  const auto msg = nlohmann::json::parse(slurp(err));
  CHECK(msg["status"] == "error");
  CHECK(msg["kind"] == "invalid_argument");

  const int missing = std::system((base + "featurize --corpus " + (dir / "nope.csv").string() + " -w " +
                                   (dir / "w").string() + " > " + out + " 2> " + err)
                                      .c_str());
  CHECK(missing != 0);
  CHECK(nlohmann::json::parse(slurp(err))["command"] == "featurize");
}
