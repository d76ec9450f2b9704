#include "sbof/forecasters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sbof/optim.hpp"

namespace sbof {

namespace {

constexpr double kSmoothLo = 1e-4;
constexpr double kSmoothHi = 1.0 - 1e-4;
constexpr double kDampLo = 0.8;
constexpr double kDampHi = 0.98;

Eigen::VectorXd flat(double v, int h) { return Eigen::VectorXd::Constant(h, v); }

Decomposition adjust(const Eigen::VectorXd& train, int m) {
  TimeSeries s{"", std::max(1, m), 1, train};
  return seasonal_decompose(s);
}

// OLS of y on [1, t], t = 0..n-1. Returns (intercept, slope).
std::pair<double, double> linear_trend(const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  if (n < 2) return {y.size() ? y[0] : 0.0, 0.0};
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  const double tm = t.mean();
  const double ym = y.mean();
  const double sxx = (t.array() - tm).square().sum();
  const double slope = ((t.array() - tm) * (y.array() - ym)).sum() / sxx;
  return {ym - slope * tm, slope};
}

double logistic(double u, double lo, double hi) {
  return lo + (hi - lo) / (1.0 + std::exp(-u));
}

double logit(double p, double lo, double hi) {
  const double z = (p - lo) / (hi - lo);
  return std::log(z / (1.0 - z));
}

struct Bounds {
  double lo, hi;
};

std::vector<Bounds> ets_bounds(EtsModel model) {
  const Bounds s{kSmoothLo, kSmoothHi};
  switch (model) {
    case EtsModel::Ses: return {s};
    case EtsModel::Holt: return {s, s};
    case EtsModel::DampedHolt: return {s, s, {kDampLo, kDampHi}};
    case EtsModel::HoltWintersAdditive: return {s, s, s};
  }
  return {};
}

struct EtsInit {
  double level = 0.0;
  double trend = 0.0;
  Eigen::VectorXd season;  // by phase
};

EtsInit ets_initial_states(const Eigen::VectorXd& y, int m, EtsModel model) {
  const Eigen::Index n = y.size();
  EtsInit init;
  init.season = Eigen::VectorXd::Zero(std::max(1, m));
  const Eigen::Index len = std::min<Eigen::Index>(n, std::max(10, 2 * m));
  if (model == EtsModel::Ses) {
    init.level = y.head(len).mean();
    return init;
  }
  Eigen::VectorXd base = y;
  if (model == EtsModel::HoltWintersAdditive) {
    const Eigen::VectorXd head = y.head(2 * m);
    const auto [a, b] = linear_trend(head);
    for (int j = 0; j < m; ++j) {
      init.season[j] = 0.5 * ((head[j] - (a + b * j)) +
                              (head[j + m] - (a + b * (j + m))));
    }
    init.season.array() -= init.season.mean();
    for (Eigen::Index t = 0; t < n; ++t) base[t] -= init.season[t % m];
  }
  const auto [a, b] = linear_trend(base.head(len));
  init.level = a - b;
  init.trend = b;
  return init;
}

// One-step-ahead SSE and h-step forecasts of an additive-error model.
double ets_run(EtsModel model, const Eigen::VectorXd& y, int m,
               const Eigen::VectorXd& par, const EtsInit& init, int h,
               Eigen::VectorXd* forecasts) {
  const double alpha = par[0];
  const double beta = par.size() > 1 ? par[1] : 0.0;
  const bool damped = model == EtsModel::DampedHolt;
  const bool seasonal = model == EtsModel::HoltWintersAdditive;
  const bool trended = model != EtsModel::Ses;
  const double phi = damped ? par[2] : 1.0;
  const double gamma = seasonal ? par[2] : 0.0;

  double level = init.level;
  double trend = trended ? init.trend : 0.0;
  Eigen::VectorXd season = init.season;
  double sse = 0.0;
  const Eigen::Index n = y.size();
  for (Eigen::Index t = 0; t < n; ++t) {
    const Eigen::Index phase = seasonal ? t % m : 0;
    const double s = seasonal ? season[phase] : 0.0;
    const double pred = level + phi * trend + s;
    const double err = y[t] - pred;
    sse += err * err;
    const double prev_level = level;
    level = alpha * (y[t] - s) + (1.0 - alpha) * (prev_level + phi * trend);
    if (trended) {
      trend = beta * (level - prev_level) + (1.0 - beta) * phi * trend;
    }
    if (seasonal) {
      season[phase] = gamma * (y[t] - prev_level - trend) + (1.0 - gamma) * s;
    }
  }
  if (forecasts) {
    forecasts->resize(h);
    double damp_sum = 0.0;
    double damp_pow = 1.0;
    for (int k = 1; k <= h; ++k) {
      damp_pow *= phi;
      damp_sum += damp_pow;
      const double s = seasonal ? season[(n + k - 1) % m] : 0.0;
      (*forecasts)[k - 1] = level + (trended ? damp_sum * trend : 0.0) + s;
    }
  }
  return sse;
}

int ets_param_count(EtsModel model, int m) {
  switch (model) {
    case EtsModel::Ses: return 2;
    case EtsModel::Holt: return 4;
    case EtsModel::DampedHolt: return 5;
    case EtsModel::HoltWintersAdditive: return 3 + 2 + (m - 1);
  }
  return 0;
}

}  // namespace

Eigen::VectorXd naive(const Eigen::VectorXd& train, int h) {
  if (train.size() < 1) throw std::invalid_argument("naive: empty series");
  return flat(train[train.size() - 1], h);
}

Eigen::VectorXd snaive(const Eigen::VectorXd& train, int m, int h,
                       Diagnostics* diag) {
  const Eigen::Index n = train.size();
  if (m <= 1) return naive(train, h);
  if (n < m) {
    if (diag) diag->flag("snaive: fewer observations than one cycle; naive used");
    return naive(train, h);
  }
  Eigen::VectorXd f(h);
  for (int k = 0; k < h; ++k) f[k] = train[n - m + (k % m)];
  return f;
}

Eigen::VectorXd rw_drift(const Eigen::VectorXd& train, int h) {
  const Eigen::Index n = train.size();
  if (n < 2) throw std::invalid_argument("rw_drift: needs at least 2 points");
  const double last = train[n - 1];
  const double slope = (last - train[0]) / static_cast<double>(n - 1);
  Eigen::VectorXd f(h);
  for (int k = 1; k <= h; ++k) f[k - 1] = last + k * slope;
  return f;
}

double ses_sse(const Eigen::VectorXd& y, double alpha) {
  return ses_fit(y, alpha).sse;
}

SesFit ses_fit(const Eigen::VectorXd& y, double alpha) {
  SesFit fit;
  fit.alpha = alpha;
  double level = y[0];
  double sse = 0.0;
  for (Eigen::Index t = 1; t < y.size(); ++t) {
    const double err = y[t] - level;
    sse += err * err;
    level += alpha * err;
  }
  fit.level = level;
  fit.sse = sse;
  return fit;
}

SesFit ses_optimize(const Eigen::VectorXd& y) {
  constexpr int kGrid = 50;
  const double step = (kSmoothHi - kSmoothLo) / kGrid;
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double sse = ses_sse(y, kSmoothLo + i * step);
    if (sse < best_sse) {
      best_sse = sse;
      best = i;
    }
  }
  const double lo = kSmoothLo + std::max(0, best - 1) * step;
  const double hi = kSmoothLo + std::min(kGrid, best + 1) * step;
  const auto m = optim::golden_section(
      [&](double a) { return ses_sse(y, a); }, lo, hi, 1e-12);
  SesFit fit = ses_fit(y, m.x[0]);
  if (!(fit.sse <= best_sse)) fit = ses_fit(y, kSmoothLo + best * step);
  return fit;
}

Eigen::VectorXd theta(const Eigen::VectorXd& train, int m, int h,
                      Diagnostics* diag) {
  const Eigen::Index n = train.size();
  if (n < 3) {
    if (diag) diag->flag("theta: fewer than 3 observations; naive used");
    return naive(train, h);
  }
  const Decomposition dec = adjust(train, m);
  const Eigen::VectorXd& y = dec.adjusted.values;

  const auto [a, b] = linear_trend(y);
  Eigen::VectorXd theta2(n);
  for (Eigen::Index t = 0; t < n; ++t) theta2[t] = 2.0 * y[t] - (a + b * t);

  SesFit ses = ses_optimize(theta2);
  if (!std::isfinite(ses.level)) {
    if (diag) diag->flag("theta: alpha optimization failed; alpha = 0.5");
    ses = ses_fit(theta2, 0.5);
  }
  Eigen::VectorXd f(h);
  for (int k = 1; k <= h; ++k) {
    const double theta0 = a + b * static_cast<double>(n - 1 + k);
    f[k - 1] = 0.5 * (theta0 + ses.level);
  }
  return dec.reseasonalize(f, n);
}

const char* ets_model_name(EtsModel m) {
  switch (m) {
    case EtsModel::Ses: return "SES";
    case EtsModel::Holt: return "Holt";
    case EtsModel::DampedHolt: return "DampedHolt";
    case EtsModel::HoltWintersAdditive: return "HoltWintersAdditive";
  }
  return "?";
}

EtsFit ets_fit(const Eigen::VectorXd& train, int m, int h, EtsModel model) {
  EtsFit fit;
  fit.model = model;
  const Eigen::Index n = train.size();
  const int k = ets_param_count(model, m);
  if (model == EtsModel::HoltWintersAdditive && (m <= 1 || n < 2 * m)) return fit;
  if (n - k - 2 <= 0) return fit;

  const EtsInit init = ets_initial_states(train, m, model);
  const auto bounds = ets_bounds(model);
  const Eigen::Index dim = static_cast<Eigen::Index>(bounds.size());
  auto to_params = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd p(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      p[i] = logistic(u[i], bounds[i].lo, bounds[i].hi);
    }
    return p;
  };
  auto objective = [&](const Eigen::VectorXd& u) {
    return ets_run(model, train, m, to_params(u), init, 0, nullptr);
  };

  // Two fixed starting simplexes: slow and fast smoothing.
  const std::array<std::array<double, 3>, 2> starts{{{0.2, 0.05, 0.1},
                                                      {0.7, 0.3, 0.3}}};
  optim::Minimum best;
  best.value = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    Eigen::VectorXd u0(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      double v = s[static_cast<std::size_t>(i)];
      if (model == EtsModel::DampedHolt && i == 2) v = 0.9;
      u0[i] = logit(v, bounds[i].lo, bounds[i].hi);
    }
    const auto cand = optim::nelder_mead(objective, u0, 1.0, 400 * static_cast<int>(dim));
    if (cand.value < best.value) best = cand;
  }
  if (!std::isfinite(best.value)) return fit;

  fit.params = to_params(best.x);
  fit.sse = ets_run(model, train, m, fit.params, init, h, &fit.forecasts);
  const double dn = static_cast<double>(n);
  const double mse = std::max(fit.sse / dn, std::numeric_limits<double>::min());
  fit.aicc = dn * std::log(mse) + 2.0 * (k + 1) +
             2.0 * (k + 1) * (k + 2) / (dn - k - 2);
  fit.ok = fit.forecasts.allFinite() && std::isfinite(fit.aicc);
  return fit;
}

Eigen::VectorXd ets(const Eigen::VectorXd& train, int m, int h,
                    Diagnostics* diag) {
  const Eigen::Index n = train.size();
  EtsFit best;
  if (n >= std::max(4, m + 2)) {
    for (EtsModel model : {EtsModel::Ses, EtsModel::Holt, EtsModel::DampedHolt,
                           EtsModel::HoltWintersAdditive}) {
      if (model == EtsModel::HoltWintersAdditive && m <= 1) continue;
      EtsFit fit = ets_fit(train, m, h, model);
      if (fit.ok && (!best.ok || fit.aicc < best.aicc)) best = std::move(fit);
    }
  }
  if (!best.ok) {
    if (diag) diag->flag("ets: no model could be fitted; naive used");
    return naive(train, h);
  }
  if (diag) diag->model = ets_model_name(best.model);
  return best.forecasts;
}

Eigen::VectorXd ArModel::forecast(const Eigen::VectorXd& history, int h) const {
  std::vector<double> buf(history.data(), history.data() + history.size());
  Eigen::VectorXd f(h);
  for (int k = 0; k < h; ++k) {
    double v = intercept;
    for (int i = 0; i < p; ++i) v += coefs[i] * buf[buf.size() - 1 - i];
    f[k] = v;
    buf.push_back(v);
  }
  return f;
}

bool fit_ar(const Eigen::VectorXd& y, int p, Eigen::Index start, ArModel& out) {
  const Eigen::Index n = y.size();
  const Eigen::Index rows = n - start;
  if (start < p || rows < p + 2) return false;
  Eigen::MatrixXd design(rows, p + 1);
  Eigen::VectorXd target = y.tail(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index t = start + r;
    design(r, 0) = 1.0;
    for (int i = 0; i < p; ++i) design(r, i + 1) = y[t - 1 - i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p + 1) return false;
  const Eigen::VectorXd beta = qr.solve(target);
  if (!beta.allFinite()) return false;
  out.p = p;
  out.intercept = beta[0];
  out.coefs = beta.tail(p);
  out.rss = (target - design * beta).squaredNorm();
  out.n_eff = rows;
  return true;
}

ArModel select_ar(const Eigen::VectorXd& y, int max_p) {
  const Eigen::Index n = y.size();
  const int cap = static_cast<int>(std::max<Eigen::Index>(0, (n - 3) / 2));
  max_p = std::clamp(max_p, 0, cap);
  int best_p = 0;
  double best_aic = std::numeric_limits<double>::infinity();
  for (int p = 0; p <= max_p; ++p) {
    ArModel m;
    if (!fit_ar(y, p, max_p, m)) continue;
    const double var = std::max(m.rss / m.n_eff, std::numeric_limits<double>::min());
    const double aic = m.n_eff * std::log(var) + 2.0 * (p + 1);
    if (aic < best_aic) {
      best_aic = aic;
      best_p = p;
    }
  }
  ArModel chosen;
  for (int p = best_p; p >= 0; --p) {
    if (fit_ar(y, p, p, chosen)) return chosen;
  }
  chosen.p = 0;
  chosen.intercept = y.mean();
  chosen.coefs.resize(0);
  return chosen;
}

Eigen::VectorXd stl_ar(const Eigen::VectorXd& train, int m, int h,
                       Diagnostics* diag) {
  const Eigen::Index n = train.size();
  Decomposition dec;
  dec.adjusted.values = train;
  if (m > 1 && n >= 2 * m + 2) {
    dec = adjust(train, m);
  } else if (m > 1 && diag) {
    diag->flag("stl_ar: too short for seasonal adjustment; AR on raw series");
  }
  const Eigen::VectorXd& y = dec.adjusted.values;
  const ArModel model = select_ar(y, 5);
  Eigen::VectorXd f = model.forecast(y, h);
  if (!f.allFinite()) {
    if (diag) diag->flag("stl_ar: non-finite AR forecast; naive used");
    return naive(train, h);
  }
  if (diag) diag->model = "AR(" + std::to_string(model.p) + ")";
  return dec.reseasonalize(f, n);
}

Eigen::VectorXd naive2(const Eigen::VectorXd& train, int m, int h,
                       Diagnostics* diag) {
  if (train.size() < 2) throw std::invalid_argument("naive2: needs at least 2 points");
  const Decomposition dec = adjust(train, m);
  if (diag && dec.fell_back()) {
    diag->flag("naive2: non-positive values; additive seasonal adjustment");
  }
  return dec.reseasonalize(naive(dec.adjusted.values, h), train.size());
}

const std::vector<std::string>& builtin_methods() {
  static const std::vector<std::string> ids{"naive", "snaive", "rw_drift",
                                            "theta", "ets",    "stl_ar",
                                            "naive2"};
  return ids;
}

bool is_builtin_method(const std::string& id) {
  const auto& ids = builtin_methods();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

Eigen::VectorXd run_method(const std::string& id, const TimeSeries& train,
                           Diagnostics* diag) {
  const auto& y = train.values;
  const int m = train.period;
  const int h = train.horizon;
  if (id == "naive") return naive(y, h);
  if (id == "snaive") return snaive(y, m, h, diag);
  if (id == "rw_drift") return rw_drift(y, h);
  if (id == "theta") return theta(y, m, h, diag);
  if (id == "ets") return ets(y, m, h, diag);
  if (id == "stl_ar") return stl_ar(y, m, h, diag);
  if (id == "naive2") return naive2(y, m, h, diag);
  throw std::invalid_argument("unknown method '" + id + "'");
}

void write_forecasts(const std::vector<ForecastSet>& sets,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  int width = 0;
  for (const auto& s : sets) width = std::max(width, s.horizon());
  out << "id,method";
  for (int k = 1; k <= width; ++k) out << ",f" << k;
  out << '\n';
  out.precision(17);
  for (const auto& s : sets) {
    out << s.series_id << ',' << s.method_id;
    for (int k = 0; k < width; ++k) {
      out << ',';
      if (k < s.horizon()) out << s.values[k];
    }
    out << '\n';
  }
}

ForecastIngest ingest_external_forecasts(
    std::istream& in, const std::map<std::string, int>& horizons) {
  ForecastIngest result;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::pair<std::string, std::string>, bool> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t,") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (line_no == 1) {
      if (fields.size() < 2 || fields[0] != "id" || fields[1] != "method") {
        throw ParseError("forecast header must start with id,method", 1, 1);
      }
      continue;
    }
    while (fields.size() > 2 && fields.back().empty()) fields.pop_back();
    RowRejection rej{line_no, fields.empty() ? "" : fields[0], ""};
    if (fields.size() < 3) {
      rej.reason = "no forecast values";
      result.rejected.push_back(rej);
      continue;
    }
    auto it = horizons.find(fields[0]);
    if (it == horizons.end()) {
      rej.reason = "unknown series id";
      result.rejected.push_back(rej);
      continue;
    }
    const int h = static_cast<int>(fields.size() - 2);
    if (h != it->second) {
      rej.reason = "expected " + std::to_string(it->second) + " values, got " +
                   std::to_string(h);
      result.rejected.push_back(rej);
      continue;
    }
    ForecastSet set;
    set.series_id = fields[0];
    set.method_id = fields[1];
    if (!is_builtin_method(set.method_id) &&
        set.method_id.rfind("external:", 0) != 0) {
      set.method_id = "external:" + set.method_id;
    }
    set.values.resize(h);
    bool ok = true;
    for (int k = 0; k < h && ok; ++k) {
      try {
        std::size_t used = 0;
        set.values[k] = std::stod(fields[k + 2], &used);
        ok = used == fields[k + 2].size() && std::isfinite(set.values[k]);
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok) rej.reason = "non-finite or non-numeric value in column " + std::to_string(k + 3);
    }
    if (!ok) {
      result.rejected.push_back(rej);
      continue;
    }
    auto key = std::make_pair(set.series_id, set.method_id);
    if (seen[key]) {
      rej.reason = "duplicate (id, method)";
      result.rejected.push_back(rej);
      continue;
    }
    seen[key] = true;
    result.sets.push_back(std::move(set));
  }
  return result;
}

ForecastIngest ingest_external_forecasts(
    const std::string& path, const std::map<std::string, int>& horizons) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return ingest_external_forecasts(in, horizons);
}

}  // namespace sbof
