#include "sbof/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sbof {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  s = s.substr(b, e - b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(s);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string_view rest(line);
  if (!rest.empty() && rest.back() == '\r') rest.remove_suffix(1);
  while (true) {
    auto pos = rest.find(',');
    out.push_back(trim(rest.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return out;
}

bool parse_double(const std::string& field, double& out) {
  if (field.empty()) return false;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

}  // namespace

void validate(const TimeSeries& s) {
  if (s.values.size() < 2) throw SeriesError(s.id, "series shorter than 2");
  if (s.period < 1) throw SeriesError(s.id, "period must be >= 1");
  if (s.horizon < 1) throw SeriesError(s.id, "horizon must be >= 1");
  if (!s.values.allFinite()) throw SeriesError(s.id, "non-finite value");
}

TimeSeries make_series(std::string id, int period, int horizon,
                       Eigen::VectorXd values) {
  TimeSeries s{std::move(id), period, horizon, std::move(values)};
  validate(s);
  return s;
}

RawSeries parse_corpus_line(const std::string& line, std::size_t line_no) {
  auto fields = split_fields(line);
  while (fields.size() > 1 && fields.back().empty()) fields.pop_back();
  RawSeries row;
  row.id = fields.front();
  row.line = line_no;
  if (row.id.empty()) throw ParseError("empty series id", line_no, 1);
  row.values.reserve(fields.size() - 1);
  for (std::size_t c = 1; c < fields.size(); ++c) {
    double v = 0.0;
    if (!parse_double(fields[c], v) || !std::isfinite(v)) {
      std::ostringstream msg;
      msg << "line " << line_no << ", column " << c + 1
          << ": non-numeric observation '" << fields[c] << "'";
      throw ParseError(msg.str(), line_no, c + 1);
    }
    row.values.push_back(v);
  }
  return row;
}

std::vector<RawSeries> read_raw_corpus(std::istream& in) {
  return read_raw_corpus(in, nullptr);
}

std::vector<RawSeries> read_raw_corpus(std::istream& in,
                                       std::vector<CorpusRejection>* rejected) {
  std::vector<RawSeries> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
    if (line_no == 1) {
      auto fields = split_fields(line);
      bool header = fields.size() > 1;
      for (std::size_t c = 1; c < fields.size() && header; ++c) {
        double v = 0.0;
        if (fields[c].empty() || parse_double(fields[c], v)) header = false;
      }
      if (header) continue;
    }
    if (!rejected) {
      rows.push_back(parse_corpus_line(line, line_no));
      continue;
    }
    try {
      rows.push_back(parse_corpus_line(line, line_no));
    } catch (const ParseError& e) {
      const auto comma = line.find(',');
      rejected->push_back({line_no, line.substr(0, comma), e.what()});
    }
  }
  return rows;
}

std::vector<RawSeries> read_raw_corpus(const std::string& path) {
  auto in = open_or_throw(path);
  return read_raw_corpus(in);
}

std::vector<TimeSeries> load_corpus(std::istream& in, int period,
                                    int horizon) {
  std::vector<TimeSeries> out;
  for (auto& row : read_raw_corpus(in)) {
    Eigen::VectorXd v =
        Eigen::Map<const Eigen::VectorXd>(row.values.data(),
                                          static_cast<Eigen::Index>(row.values.size()));
    out.push_back(make_series(row.id, period, horizon, std::move(v)));
  }
  return out;
}

std::vector<TimeSeries> load_corpus(const std::string& path, int period,
                                    int horizon) {
  auto in = open_or_throw(path);
  return load_corpus(in, period, horizon);
}

std::vector<TimeSeries> load_corpus(const std::string& path,
                                    const Metadata& meta) {
  std::vector<TimeSeries> out;
  for (auto& row : read_raw_corpus(path)) {
    auto it = meta.find(row.id);
    if (it == meta.end()) throw SeriesError(row.id, "missing from metadata");
    Eigen::VectorXd v =
        Eigen::Map<const Eigen::VectorXd>(row.values.data(),
                                          static_cast<Eigen::Index>(row.values.size()));
    out.push_back(make_series(row.id, it->second.period, it->second.horizon,
                              std::move(v)));
  }
  return out;
}

Metadata load_metadata(std::istream& in) {
  Metadata meta;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_fields(line);
    if (line_no == 1) {
      if (fields.size() < 3 || fields[0] != "id" || fields[1] != "period" ||
          fields[2] != "horizon") {
        throw ParseError("metadata header must be id,period,horizon", 1, 1);
      }
      continue;
    }
    if (fields.size() < 3) {
      throw ParseError("metadata row needs id,period,horizon", line_no, 1);
    }
    SeriesInfo info;
    for (std::size_t c = 1; c <= 2; ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v) || v < 1 || v != std::floor(v)) {
        throw ParseError("metadata period/horizon must be positive integers",
                         line_no, c + 1);
      }
      (c == 1 ? info.period : info.horizon) = static_cast<int>(v);
    }
    if (fields.size() > 3) info.group = fields[3];
    meta[fields[0]] = info;
  }
  return meta;
}

Metadata load_metadata(const std::string& path) {
  auto in = open_or_throw(path);
  return load_metadata(in);
}

const std::vector<std::string>& frequency_groups() {
  static const std::vector<std::string> groups{
      "Yearly", "Quarterly", "Monthly", "Weekly", "Daily", "Hourly", "Other"};
  return groups;
}

std::string frequency_group(const std::string& id, int period,
                            const std::string& explicit_group) {
  if (!explicit_group.empty()) return explicit_group;
  if (id.size() >= 2 && std::isdigit(static_cast<unsigned char>(id[1]))) {
    switch (id[0]) {
      case 'Y': return "Yearly";
      case 'Q': return "Quarterly";
      case 'M': return "Monthly";
      case 'W': return "Weekly";
      case 'D': return "Daily";
      case 'H': return "Hourly";
      default: break;
    }
  }
  switch (period) {
    case 1: return "Yearly";
    case 4: return "Quarterly";
    case 12: return "Monthly";
    case 52: return "Weekly";
    case 7: return "Daily";
    case 24: return "Hourly";
    default: return "Other";
  }
}

SplitSeries split_train_test(const TimeSeries& s) {
  const Eigen::Index n = s.values.size();
  const Eigen::Index h = s.horizon;
  if (n <= h) throw SeriesError(s.id, "series not longer than its horizon");
  const Eigen::Index min_train = std::max<Eigen::Index>(2, s.period + 1);
  if (n - h < min_train) {
    throw SeriesError(s.id, "training part shorter than max(2, period+1)");
  }
  SplitSeries out;
  out.train = TimeSeries{s.id, s.period, s.horizon, s.values.head(n - h)};
  out.test = s.values.tail(h);
  return out;
}

Eigen::VectorXd acf(const Eigen::VectorXd& x, int max_lag) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(max_lag + 1);
  if (n == 0) return r;
  const Eigen::VectorXd c = x.array() - x.mean();
  const double denom = c.squaredNorm();
  if (denom <= 0.0) return r;
  for (int k = 0; k <= max_lag && k < n; ++k) {
    r[k] = c.head(n - k).dot(c.tail(n - k)) / denom;
  }
  return r;
}

bool seasonality_test(const Eigen::VectorXd& values, int period) {
  const Eigen::Index n = values.size();
  if (period <= 1 || n < 3 * static_cast<Eigen::Index>(period)) return false;
  const Eigen::VectorXd r = acf(values, period);
  if (r[0] == 0.0) return false;  // constant series
  double sum_sq = 0.0;
  for (int i = 1; i < period; ++i) sum_sq += r[i] * r[i];
  const double limit =
      1.645 * std::sqrt((1.0 + 2.0 * sum_sq) / static_cast<double>(n));
  return std::abs(r[period]) > limit;
}

Eigen::VectorXd Decomposition::reseasonalize(
    const Eigen::VectorXd& adjusted_values, Eigen::Index start) const {
  Eigen::VectorXd out = adjusted_values;
  if (kind == SeasonalKind::None) return out;
  const Eigen::Index m = factors.size();
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double f = factors[(start + i) % m];
    if (kind == SeasonalKind::Multiplicative) {
      out[i] *= f;
    } else {
      out[i] += f;
    }
  }
  return out;
}

Decomposition classical_decompose(const TimeSeries& s) {
  const int m = s.period;
  const Eigen::Index n = s.values.size();
  if (m <= 1 || n < 2 * static_cast<Eigen::Index>(m)) {
    throw SeriesError(s.id, "decomposition needs period > 1 and two cycles");
  }
  const bool multiplicative = (s.values.array() > 0.0).all();

  // Centered moving average: 2xm for even m, plain m for odd m.
  Eigen::VectorXd weights;
  if (m % 2 == 0) {
    weights = Eigen::VectorXd::Constant(m + 1, 1.0 / m);
    weights[0] = weights[m] = 0.5 / m;
  } else {
    weights = Eigen::VectorXd::Constant(m, 1.0 / m);
  }
  const Eigen::Index half = weights.size() / 2;

  Eigen::VectorXd sums = Eigen::VectorXd::Zero(m);
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(m);
  for (Eigen::Index t = half; t + half < n; ++t) {
    const double trend =
        weights.dot(s.values.segment(t - half, weights.size()));
    const double detrended =
        multiplicative ? s.values[t] / trend : s.values[t] - trend;
    sums[t % m] += detrended;
    counts[t % m] += 1;
  }

  Decomposition d;
  d.kind = multiplicative ? SeasonalKind::Multiplicative
                          : SeasonalKind::Additive;
  d.factors = sums.array() / counts.cast<double>().array();
  if (multiplicative) {
    d.factors /= d.factors.mean();
  } else {
    d.factors.array() -= d.factors.mean();
  }
  d.adjusted = s;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double f = d.factors[t % m];
    d.adjusted.values[t] =
        multiplicative ? s.values[t] / f : s.values[t] - f;
  }
  return d;
}

Decomposition seasonal_decompose(const TimeSeries& s) {
  if (!seasonality_test(s)) {
    Decomposition d;
    d.factors = Eigen::VectorXd::Ones(std::max(1, s.period));
    d.adjusted = s;
    return d;
  }
  return classical_decompose(s);
}

}  // namespace sbof
