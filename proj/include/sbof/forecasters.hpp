#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbof/core.hpp"

namespace sbof {

/// Set by a method when it could not run as specified and used a fallback.
struct Diagnostics {
  bool fallback = false;
  std::string note;
  std::string model;  // selected model name, where a method selects one

  void flag(std::string why) {
    fallback = true;
    note = std::move(why);
  }
};

Eigen::VectorXd naive(const Eigen::VectorXd& train, int h);
Eigen::VectorXd snaive(const Eigen::VectorXd& train, int m, int h,
                       Diagnostics* diag = nullptr);
Eigen::VectorXd rw_drift(const Eigen::VectorXd& train, int h);
Eigen::VectorXd theta(const Eigen::VectorXd& train, int m, int h,
                      Diagnostics* diag = nullptr);
Eigen::VectorXd ets(const Eigen::VectorXd& train, int m, int h,
                    Diagnostics* diag = nullptr);
Eigen::VectorXd stl_ar(const Eigen::VectorXd& train, int m, int h,
                       Diagnostics* diag = nullptr);
Eigen::VectorXd naive2(const Eigen::VectorXd& train, int m, int h,
                       Diagnostics* diag = nullptr);

/// Simple exponential smoothing with level initialized to the first value.
struct SesFit {
  double alpha = 0.5;
  double level = 0.0;  // final level, the flat forecast
  double sse = 0.0;
};
double ses_sse(const Eigen::VectorXd& y, double alpha);
SesFit ses_fit(const Eigen::VectorXd& y, double alpha);
/// Least-squares alpha on [1e-4, 1 - 1e-4]: grid scan then golden refinement.
SesFit ses_optimize(const Eigen::VectorXd& y);

/// Ordinary least-squares AR(p) with intercept.
struct ArModel {
  int p = 0;
  double intercept = 0.0;
  Eigen::VectorXd coefs;  // coefs[i] multiplies y_{t-1-i}
  double rss = 0.0;
  Eigen::Index n_eff = 0;

  Eigen::VectorXd forecast(const Eigen::VectorXd& history, int h) const;
};
/// Fits AR(p) on y_t for t >= start (start >= p). Returns false when the
/// design is rank deficient.
bool fit_ar(const Eigen::VectorXd& y, int p, Eigen::Index start, ArModel& out);
/// AIC selection over p in [0, max_p] on a common estimation sample,
/// refitting the chosen order on all usable observations.
ArModel select_ar(const Eigen::VectorXd& y, int max_p = 5);

/// Additive-error exponential smoothing models fitted by ets().
enum class EtsModel { Ses, Holt, DampedHolt, HoltWintersAdditive };
const char* ets_model_name(EtsModel m);

struct EtsFit {
  EtsModel model = EtsModel::Ses;
  Eigen::VectorXd params;  // alpha, beta, gamma / phi as applicable
  double sse = 0.0;
  double aicc = 0.0;
  Eigen::VectorXd forecasts;
  bool ok = false;
};
EtsFit ets_fit(const Eigen::VectorXd& train, int m, int h, EtsModel model);

/// Method identifiers of the in-repo pool.
const std::vector<std::string>& builtin_methods();
bool is_builtin_method(const std::string& id);

/// Runs a pool method by id on a training series.
Eigen::VectorXd run_method(const std::string& id, const TimeSeries& train,
                           Diagnostics* diag = nullptr);

struct ForecastSet {
  std::string series_id;
  std::string method_id;
  Eigen::VectorXd values;

  int horizon() const { return static_cast<int>(values.size()); }
};

struct RowRejection {
  std::size_t line = 0;
  std::string series_id;
  std::string reason;
};

struct ForecastIngest {
  std::vector<ForecastSet> sets;
  std::vector<RowRejection> rejected;
};

/// Writes `id,method,f1,...,fH` with H the largest horizon; shorter rows
/// leave trailing fields empty. Values use round-trip precision.
void write_forecasts(const std::vector<ForecastSet>& sets,
                     const std::string& path);

/// Parses a forecast CSV, validating ids and horizons against `horizons`
/// (series id -> h). Method names that are not in-repo ids gain an
/// `external:` prefix.
ForecastIngest ingest_external_forecasts(
    std::istream& in, const std::map<std::string, int>& horizons);
ForecastIngest ingest_external_forecasts(
    const std::string& path, const std::map<std::string, int>& horizons);

}  // namespace sbof
