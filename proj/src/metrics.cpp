#include "sbof/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sbof/core.hpp"

namespace sbof {

namespace {

// Ratio against the Naive2 reference with the zero-denominator policy.
double reference_ratio(double value, double reference, bool& flagged) {
  if (reference > 0.0) return value / reference;
  flagged = true;
  // Equal to a perfect reference counts as matching it.
  return value > 0.0 ? kOwaRatioCap : 1.0;
}

std::string fmt(double v, int digits = 3) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

OwaValue owa_contrib(double smape_method, std::optional<double> mase_method,
                     double smape_naive2, std::optional<double> mase_naive2) {
  OwaValue out;
  const double s = reference_ratio(smape_method, smape_naive2, out.flagged);
  if (!mase_method || !mase_naive2) {
    out.value = s;
    out.flagged = true;
    return out;
  }
  const double m = reference_ratio(*mase_method, *mase_naive2, out.flagged);
  out.value = 0.5 * (s + m);
  return out;
}

int LossMatrix::method_index(const std::string& id) const {
  const auto it = std::find(method_ids.begin(), method_ids.end(), id);
  return it == method_ids.end() ? -1 : static_cast<int>(it - method_ids.begin());
}

LossMatrix build_loss_matrix(const std::vector<SeriesOutcome>& outcomes,
                             const std::vector<std::string>& method_ids) {
  const Eigen::Index n = static_cast<Eigen::Index>(outcomes.size());
  const Eigen::Index m = static_cast<Eigen::Index>(method_ids.size());
  LossMatrix lm;
  lm.method_ids = method_ids;
  lm.smape.resize(n, m);
  lm.mase.resize(n, m);
  lm.owa.resize(n, m);
  lm.flagged.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = outcomes[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(o.forecasts.size()) != m) {
      throw std::invalid_argument(o.id + ": forecast count does not match methods");
    }
    lm.series_ids.push_back(o.id);
    lm.groups.push_back(o.group);
    const double s_ref = smape(o.actual, o.naive2);
    const auto m_ref = mase(o.train, o.actual, o.naive2, o.period);
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& f = o.forecasts[static_cast<std::size_t>(j)];
      const double s = smape(o.actual, f);
      const auto ms = mase(o.train, o.actual, f, o.period);
      const OwaValue w = owa_contrib(s, ms, s_ref, m_ref);
      lm.smape(i, j) = s;
      lm.mase(i, j) = ms.value_or(std::numeric_limits<double>::quiet_NaN());
      lm.owa(i, j) = w.value;
      lm.flagged(i, j) = w.flagged;
    }
  }
  return lm;
}

void write_loss_csv(const LossMatrix& losses, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "id,method,smape,mase,owa\n";
  for (Eigen::Index i = 0; i < losses.series_count(); ++i) {
    for (Eigen::Index j = 0; j < losses.method_count(); ++j) {
      out << losses.series_ids[static_cast<std::size_t>(i)] << ','
          << losses.method_ids[static_cast<std::size_t>(j)] << ','
          << losses.smape(i, j) << ',';
      if (std::isfinite(losses.mase(i, j))) out << losses.mase(i, j);
      else out << "NA";
      out << ',' << losses.owa(i, j) << '\n';
    }
  }
}

AggregateTable aggregate(const LossMatrix& losses,
                         const std::string& naive2_method) {
  AggregateTable table;
  table.method_ids = losses.method_ids;
  std::vector<std::string> present;
  for (const auto& g : frequency_groups()) {
    if (std::find(losses.groups.begin(), losses.groups.end(), g) != losses.groups.end()) {
      present.push_back(g);
    }
  }
  for (const auto& g : losses.groups) {
    if (std::find(present.begin(), present.end(), g) == present.end()) present.push_back(g);
  }
  table.columns = present;
  table.columns.push_back("Total");

  const Eigen::Index nm = losses.method_count();
  const int ref = losses.method_index(naive2_method);
  table.cells.assign(static_cast<std::size_t>(nm),
                     std::vector<AggregateCell>(table.columns.size()));
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const bool total = c + 1 == table.columns.size();
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < losses.series_count(); ++i) {
      if (total || losses.groups[static_cast<std::size_t>(i)] == table.columns[c]) {
        rows.push_back(i);
      }
    }
    for (Eigen::Index j = 0; j < nm; ++j) {
      AggregateCell& cell = table.cells[static_cast<std::size_t>(j)][c];
      cell.series = static_cast<int>(rows.size());
      double s = 0.0, ms = 0.0, o = 0.0;
      int defined = 0;
      for (auto i : rows) {
        s += losses.smape(i, j);
        o += losses.owa(i, j);
        if (std::isfinite(losses.mase(i, j))) {
          ms += losses.mase(i, j);
          ++defined;
        }
      }
      const double count = static_cast<double>(rows.size());
      cell.smape = rows.empty() ? NAN : s / count;
      cell.owa = rows.empty() ? NAN : o / count;
      cell.mase = defined ? ms / defined : NAN;
      cell.mase_excluded = cell.series - defined;
    }
    if (ref >= 0) {
      const AggregateCell& r = table.cells[static_cast<std::size_t>(ref)][c];
      for (Eigen::Index j = 0; j < nm; ++j) {
        AggregateCell& cell = table.cells[static_cast<std::size_t>(j)][c];
        if (r.smape > 0.0 && r.mase > 0.0) {
          cell.owa_group = 0.5 * (cell.smape / r.smape + cell.mase / r.mase);
        }
      }
    }
  }
  return table;
}

std::string format_table(const AggregateTable& table) {
  std::ostringstream out;
  std::size_t width = 8;
  for (const auto& m : table.method_ids) width = std::max(width, m.size() + 2);
  for (const char* measure : {"sMAPE", "MASE", "OWA"}) {
    out << measure << '\n';
    out << std::string(width, ' ');
    for (const auto& c : table.columns) {
      out << c << std::string(c.size() < 10 ? 11 - c.size() : 1, ' ');
    }
    out << '\n';
    for (std::size_t j = 0; j < table.method_ids.size(); ++j) {
      out << table.method_ids[j]
          << std::string(width - table.method_ids[j].size(), ' ');
      for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto& cell = table.cells[j][c];
        const double v = measure[0] == 's' ? cell.smape
                         : measure[0] == 'M' ? cell.mase
                                             : cell.owa;
        const std::string s = fmt(v);
        out << s << std::string(s.size() < 10 ? 11 - s.size() : 1, ' ');
      }
      out << '\n';
    }
    out << '\n';
  }
  return out.str();
}

void write_aggregate_csv(const AggregateTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  // Fixed column layout: every canonical group plus Total, even if empty.
  std::vector<std::string> columns;
  for (const auto& g : frequency_groups()) {
    if (g != "Other") columns.push_back(g);
  }
  for (const auto& c : table.columns) {
    if (c != "Total" && std::find(columns.begin(), columns.end(), c) == columns.end()) {
      columns.push_back(c);
    }
  }
  columns.push_back("Total");

  out << "method";
  for (const auto& c : columns) out << ',' << c << "_sMAPE," << c << "_MASE," << c << "_OWA";
  for (const auto& c : columns) out << ',' << c << "_OWA_group";
  out << '\n';
  for (std::size_t j = 0; j < table.method_ids.size(); ++j) {
    out << table.method_ids[j];
    std::vector<std::string> group_owa;
    for (const auto& c : columns) {
      const auto it = std::find(table.columns.begin(), table.columns.end(), c);
      if (it == table.columns.end()) {
        out << ",NA,NA,NA";
        group_owa.emplace_back("NA");
        continue;
      }
      const auto& cell = table.cells[j][static_cast<std::size_t>(it - table.columns.begin())];
      out << ',' << fmt(cell.smape, 6) << ',' << fmt(cell.mase, 6) << ','
          << fmt(cell.owa, 6);
      group_owa.push_back(fmt(cell.owa_group, 6));
    }
    for (const auto& g : group_owa) out << ',' << g;
    out << '\n';
  }
}

}  // namespace sbof
