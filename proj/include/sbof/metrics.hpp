#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sbof {

/// Symmetric MAPE in percent; terms with |Y| + |F| = 0 contribute zero.
template <typename DerivedA, typename DerivedF>
double smape(const Eigen::MatrixBase<DerivedA>& actual,
             const Eigen::MatrixBase<DerivedF>& forecast) {
  if (actual.size() != forecast.size()) {
    throw std::invalid_argument("smape: length mismatch");
  }
  const Eigen::Index h = actual.size();
  if (h == 0) throw std::invalid_argument("smape: empty horizon");
  double acc = 0.0;
  for (Eigen::Index t = 0; t < h; ++t) {
    const double a = static_cast<double>(actual(t));
    const double f = static_cast<double>(forecast(t));
    const double denom = std::abs(a) + std::abs(f);
    if (denom > 0.0) acc += 2.0 * std::abs(a - f) / denom;
  }
  return 100.0 * acc / static_cast<double>(h);
}

/// In-sample seasonal naive MAE, the MASE scale. Empty when n <= m or the
/// scale is zero.
template <typename Derived>
std::optional<double> mase_scale(const Eigen::MatrixBase<Derived>& train, int m) {
  const Eigen::Index n = train.size();
  if (m < 1 || n <= m) return std::nullopt;
  double acc = 0.0;
  for (Eigen::Index t = m; t < n; ++t) {
    acc += std::abs(static_cast<double>(train(t) - train(t - m)));
  }
  const double scale = acc / static_cast<double>(n - m);
  if (!(scale > 0.0) || !std::isfinite(scale)) return std::nullopt;
  return scale;
}

/// Mean absolute scaled error; empty (undefined) when the scale is zero.
template <typename DerivedT, typename DerivedA, typename DerivedF>
std::optional<double> mase(const Eigen::MatrixBase<DerivedT>& train,
                           const Eigen::MatrixBase<DerivedA>& actual,
                           const Eigen::MatrixBase<DerivedF>& forecast, int m) {
  if (actual.size() != forecast.size()) {
    throw std::invalid_argument("mase: length mismatch");
  }
  const auto scale = mase_scale(train, m);
  if (!scale) return std::nullopt;
  const double mae =
      (actual.template cast<double>() - forecast.template cast<double>())
          .cwiseAbs()
          .mean();
  return mae / *scale;
}

/// Ratio cap applied when the Naive2 reference error is zero.
inline constexpr double kOwaRatioCap = 20.0;

struct OwaValue {
  double value = 0.0;
  bool flagged = false;  // a degenerate-denominator policy was applied
};

/// Per-series OWA contribution. `mase_*` may be empty (undefined scale);
/// then only the sMAPE ratio is used.
OwaValue owa_contrib(double smape_method, std::optional<double> mase_method,
                     double smape_naive2, std::optional<double> mase_naive2);

struct LossMatrix {
  std::vector<std::string> series_ids;
  std::vector<std::string> groups;  // frequency group per series
  std::vector<std::string> method_ids;
  Eigen::MatrixXd smape;  // N x M
  Eigen::MatrixXd mase;   // N x M, NaN where undefined
  Eigen::MatrixXd owa;    // N x M, O_nm
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> flagged;

  Eigen::Index series_count() const { return static_cast<Eigen::Index>(series_ids.size()); }
  Eigen::Index method_count() const { return static_cast<Eigen::Index>(method_ids.size()); }
  int method_index(const std::string& id) const;
};

/// Fills a loss matrix from actuals and forecasts. forecasts[n][m] is the
/// forecast of method m for series n; the Naive2 reference is looked up by
/// `naive2_method` among the method ids, or passed separately.
struct SeriesOutcome {
  std::string id;
  std::string group;
  Eigen::VectorXd train;
  Eigen::VectorXd actual;
  int period = 1;
  Eigen::VectorXd naive2;
  std::vector<Eigen::VectorXd> forecasts;  // one per method
};

LossMatrix build_loss_matrix(const std::vector<SeriesOutcome>& outcomes,
                             const std::vector<std::string>& method_ids);

void write_loss_csv(const LossMatrix& losses, const std::string& path);

/// One cell per (method, group): mean sMAPE, mean MASE (defined series
/// only), mean per-series OWA, and the group-normalized OWA computed from
/// the Naive2 means.
struct AggregateCell {
  double smape = 0.0;
  double mase = 0.0;
  double owa = 0.0;
  double owa_group = std::numeric_limits<double>::quiet_NaN();
  int series = 0;
  int mase_excluded = 0;
};

struct AggregateTable {
  std::vector<std::string> method_ids;
  std::vector<std::string> columns;  // groups present, then "Total"
  std::vector<std::vector<AggregateCell>> cells;  // [method][column]
};

/// Groups come from losses.groups; `naive2_method` names the column used for
/// the group-normalized OWA (skipped when absent).
AggregateTable aggregate(const LossMatrix& losses,
                         const std::string& naive2_method = "naive2");

std::string format_table(const AggregateTable& table);
void write_aggregate_csv(const AggregateTable& table, const std::string& path);

}  // namespace sbof
