#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sbof/config.hpp"
#include "sbof/core.hpp"
#include "sbof/sift.hpp"
#include "sbof/spm.hpp"

namespace sbof {

/// One series under the evaluation protocol. The outer split holds out the
/// test tail (from the test file, or the last h values of the corpus row);
/// the inner split holds out the last h values of the outer training part
/// and is what the combiner learns from.
struct SeriesCase {
  std::string id;
  std::string group;
  int period = 1;
  int horizon = 1;
  TimeSeries inner_train;
  Eigen::VectorXd inner_actual;
  TimeSeries outer_train;
  Eigen::VectorXd outer_actual;
};

struct SkippedSeries {
  std::string id;
  std::size_t line = 0;
  std::string reason;
};

struct CorpusCases {
  std::vector<SeriesCase> cases;
  std::vector<SkippedSeries> skipped;
};

/// Loads corpus, metadata and test tails; series that cannot be split are
/// skipped with a reason rather than aborting.
CorpusCases prepare_cases(const RunConfig& cfg);

/// RP image of a series under the configured encoding.
GrayImage series_image(const Eigen::VectorXd& values, const RunConfig& cfg);

/// Encodes descriptors with LLC and max-pools them over the pyramid.
FeatureVector encode_features(const std::string& id,
                              const std::vector<Descriptor>& descriptors,
                              const Codebook& codebook, const RunConfig& cfg);

struct Projection {
  Eigen::MatrixXd points;     // N x 2 scores
  Eigen::Vector2d variances;  // sample variance along each component
  Eigen::MatrixXd axes;       // D x 2 orthonormal directions
};

/// Top-two principal components of the rows of `x`.
Projection pca_project(const Eigen::MatrixXd& x);

/// Subcommands. Each returns a JSON summary; failures throw.
nlohmann::json cmd_featurize(const RunConfig& cfg);
nlohmann::json cmd_forecast(const RunConfig& cfg);
nlohmann::json cmd_train(const RunConfig& cfg);
nlohmann::json cmd_evaluate(const RunConfig& cfg);
nlohmann::json cmd_plot(const RunConfig& cfg);
/// `features` defaults to the outer-split feature file in the work dir.
nlohmann::json cmd_project(const RunConfig& cfg, const std::string& features = {});

/// File names inside the work directory.
namespace files {
inline constexpr const char* kCodebook = "codebook.bin";
inline constexpr const char* kFeaturesTrain = "features_train.bin";
inline constexpr const char* kFeaturesTest = "features_test.bin";
inline constexpr const char* kFeaturizeManifest = "featurize_manifest.json";
inline constexpr const char* kForecastsTrain = "forecasts_train.csv";
inline constexpr const char* kForecastsTest = "forecasts_test.csv";
inline constexpr const char* kForecastManifest = "forecast_manifest.json";
inline constexpr const char* kLossesTrain = "losses_train.csv";
inline constexpr const char* kModelIndex = "model_index.json";
inline constexpr const char* kLossCurve = "loss_curve.csv";
inline constexpr const char* kCvReport = "cv_report.csv";
inline constexpr const char* kReportText = "report.txt";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kLossesTest = "losses_test.csv";
inline constexpr const char* kWeightsTest = "weights_test.csv";
inline constexpr const char* kProjection = "projection.csv";
inline constexpr const char* kPlotDir = "plots";
}  // namespace files

/// Pool row name of the learned combination in reports.
inline constexpr const char* kCombinationId = "combination";

}  // namespace sbof
