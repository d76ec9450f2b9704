#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sbof {

/// Softmax with max-shift; the result sums to one.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w = (p.array() - p.maxCoeff()).exp();
  return w / w.sum();
}

/// Weighted loss sum_m w_m O_m at w = softmax(p).
double softmax_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& owa);
/// dL/dp_m = w_m (O_m - L).
Eigen::VectorXd softmax_gradient(const Eigen::VectorXd& p, const Eigen::VectorXd& owa);
/// d2L/dp_m2 = w_m (O_m - L)(1 - 2 w_m), unfloored.
Eigen::VectorXd softmax_hessian_diag(const Eigen::VectorXd& p, const Eigen::VectorXd& owa);

/// Lower bound applied to per-row Hessians for split scoring and leaves.
inline constexpr double kHessianFloor = 1e-6;

struct HyperParams {
  int max_depth = 6;
  double learning_rate = 0.05;
  double subsample_rows = 1.0;
  double subsample_cols = 1.0;
  int rounds = 100;

  /// Throws std::invalid_argument outside the documented ranges; rounds may
  /// be zero (an untrained model).
  void validate() const;
  std::string describe() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] < threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output, already scaled by the learning rate
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  int depth() const;
};

struct BoostingOptions {
  double lambda = 1.0;
  double min_child_weight = 1.0;  // minimum rows per child
  int max_bins = 256;
  int threads = 1;
};

struct WeightModel {
  int methods = 0;
  int features = 0;
  HyperParams params;
  std::uint64_t seed = 0;
  std::vector<std::vector<RegressionTree>> rounds;  // [round][method]
  std::vector<double> train_loss;  // mean L after 0..rounds updates

  /// Raw scores p(f), one per method.
  Eigen::VectorXd scores(const Eigen::Ref<const Eigen::RowVectorXd>& f) const;
  Eigen::VectorXd predict_weights(const Eigen::Ref<const Eigen::RowVectorXd>& f) const;
  /// Weights for every row of `features`; row n holds series n.
  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& features) const;
};

/// Per-feature cut points (at most max_bins - 1) and the binned data.
struct FeatureBins {
  std::vector<std::vector<double>> cuts;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> codes;  // N x D
};
FeatureBins bin_features(const Eigen::MatrixXd& features, int max_bins = 256);

/// Gradient tree boosting of M softmax scores against the N x M OWA
/// contribution matrix, one tree per method per round.
WeightModel train_weight_model(const Eigen::MatrixXd& features,
                               const Eigen::MatrixXd& owa,
                               const HyperParams& params, std::uint64_t seed,
                               const BoostingOptions& options = {});

/// Mean over rows of sum_m w_nm O_nm.
double mean_weighted_loss(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& owa);

/// Pointwise convex combination: row m of `forecasts` is method m.
Eigen::VectorXd combine_forecasts(const Eigen::VectorXd& weights,
                                  const Eigen::MatrixXd& forecasts);

void save_weight_model(const WeightModel& model, const std::string& path);
WeightModel load_weight_model(const std::string& path);

struct SearchSpace {
  int depth_lo = 6, depth_hi = 50;
  double rate_lo = 0.001, rate_hi = 1.0;
  double rows_lo = 0.5, rows_hi = 1.0;
  double cols_lo = 0.5, cols_hi = 1.0;
  int rounds_lo = 1, rounds_hi = 250;
};

struct CvResult {
  std::vector<HyperParams> configs;
  std::vector<std::vector<double>> fold_loss;  // [config][fold]
  std::vector<double> mean_loss;
  int selected = -1;  // -1 when the budget is zero
  HyperParams best;
};

/// Samples `budget` configurations (learning rate log-uniform, the rest
/// uniform) and selects the lowest mean validation weighted loss under
/// k-fold cross-validation. A zero budget returns `defaults`.
CvResult cv_search(const Eigen::MatrixXd& features, const Eigen::MatrixXd& owa,
                   const SearchSpace& space, int folds, int budget,
                   std::uint64_t seed, const HyperParams& defaults = {},
                   const BoostingOptions& options = {});

}  // namespace sbof
