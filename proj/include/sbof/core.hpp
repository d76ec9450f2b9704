#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sbof {

/// Raised for malformed input files; carries the 1-based line and column.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error(what), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Raised when a series violates a structural requirement; names the series.
class SeriesError : public std::invalid_argument {
 public:
  SeriesError(const std::string& id, const std::string& what)
      : std::invalid_argument(id + ": " + what), id_(id) {}

  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

/// A univariate series with its seasonal period and forecast horizon.
struct TimeSeries {
  std::string id;
  int period = 1;
  int horizon = 1;
  Eigen::VectorXd values;

  Eigen::Index size() const { return values.size(); }
};

/// Checks the TimeSeries invariants; throws SeriesError on violation.
void validate(const TimeSeries& s);

TimeSeries make_series(std::string id, int period, int horizon,
                       Eigen::VectorXd values);

struct SplitSeries {
  TimeSeries train;
  Eigen::VectorXd test;
};

/// Per-series settings from the metadata table.
struct SeriesInfo {
  int period = 1;
  int horizon = 1;
  std::string group;
};

using Metadata = std::map<std::string, SeriesInfo>;

/// Rows of an M4-style file before period/horizon are attached.
struct RawSeries {
  std::string id;
  std::vector<double> values;
  std::size_t line = 0;
};

/// Parses one M4-style line: `id,v1,v2,...` with optional double quotes and
/// trailing empty fields. Throws ParseError with the given line number.
RawSeries parse_corpus_line(const std::string& line, std::size_t line_no);

/// Reads every row of an M4-style stream. A first line whose observation
/// fields are all non-numeric labels (the `"V1","V2",...` header of the M4
/// distribution) is skipped.
std::vector<RawSeries> read_raw_corpus(std::istream& in);
std::vector<RawSeries> read_raw_corpus(const std::string& path);

struct CorpusRejection {
  std::size_t line = 0;
  std::string id;  // first field as written, possibly empty
  std::string reason;
};

/// Lenient variant: malformed rows are appended to `rejected` instead of
/// throwing. A null `rejected` behaves like the strict overload.
std::vector<RawSeries> read_raw_corpus(std::istream& in,
                                       std::vector<CorpusRejection>* rejected);

std::vector<TimeSeries> load_corpus(std::istream& in, int period, int horizon);
std::vector<TimeSeries> load_corpus(const std::string& path, int period,
                                    int horizon);

/// Loads a corpus whose period and horizon come from `meta`. Ids missing
/// from the table raise SeriesError.
std::vector<TimeSeries> load_corpus(const std::string& path,
                                    const Metadata& meta);

/// Reads a CSV with header `id,period,horizon` and an optional fourth
/// `group` column.
Metadata load_metadata(std::istream& in);
Metadata load_metadata(const std::string& path);

/// Frequency group for a series: explicit metadata group, else the M4 id
/// prefix letter (Y/Q/M/W/D/H), else a guess from the period.
std::string frequency_group(const std::string& id, int period,
                            const std::string& explicit_group = {});

/// Canonical ordering of frequency groups in reports.
const std::vector<std::string>& frequency_groups();

SplitSeries split_train_test(const TimeSeries& s);

/// Sample autocorrelation at lags 0..max_lag (biased estimator).
Eigen::VectorXd acf(const Eigen::VectorXd& x, int max_lag);

/// 90% ACF seasonality test used by the M4 benchmarks.
bool seasonality_test(const Eigen::VectorXd& values, int period);
inline bool seasonality_test(const TimeSeries& s) {
  return seasonality_test(s.values, s.period);
}

enum class SeasonalKind { None, Multiplicative, Additive };

struct Decomposition {
  SeasonalKind kind = SeasonalKind::None;
  /// One factor per phase; t mod period indexes it (t = 0 is the first value).
  Eigen::VectorXd factors;
  TimeSeries adjusted;

  /// Reseasonalizes values that continue the series from time index `start`.
  Eigen::VectorXd reseasonalize(const Eigen::VectorXd& adjusted_values,
                                Eigen::Index start) const;
  bool fell_back() const { return kind == SeasonalKind::Additive; }
};

/// Classical decomposition gated by seasonality_test: identity factors when
/// the test fails, multiplicative otherwise, additive when any value <= 0.
Decomposition seasonal_decompose(const TimeSeries& s);

/// Classical decomposition without the seasonality gate. Requires
/// period > 1 and at least two full cycles.
Decomposition classical_decompose(const TimeSeries& s);

}  // namespace sbof
