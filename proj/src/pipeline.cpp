#include "sbof/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>

#include "sbof/codebook.hpp"
#include "sbof/combiner.hpp"
#include "sbof/forecasters.hpp"
#include "sbof/llc.hpp"
#include "sbof/metrics.hpp"
#include "sbof/parallel.hpp"
#include "sbof/rp.hpp"

namespace sbof {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// FNV-1a over the tag, mixed into the run seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return seed ^ h;
}

fs::path work_dir(const RunConfig& cfg) {
  fs::path dir(cfg.work_dir);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

std::string file_stem(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    if (!ok) c = '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json skipped_json(const std::vector<SkippedSeries>& skipped) {
  json arr = json::array();
  for (const auto& s : skipped) {
    arr.push_back({{"id", s.id}, {"line", s.line}, {"reason", s.reason}});
  }
  return arr;
}

// Forecasts keyed by series then method.
using ForecastTable = std::map<std::string, std::map<std::string, Eigen::VectorXd>>;

ForecastTable read_forecast_table(const fs::path& path, const std::map<std::string, int>& horizons) {
  const ForecastIngest ingest = ingest_external_forecasts(path.string(), horizons);
  if (!ingest.rejected.empty()) {
    const auto& r = ingest.rejected.front();
    throw std::runtime_error(path.string() + " line " + std::to_string(r.line) + ": " + r.reason);
  }
  ForecastTable table;
  for (const auto& s : ingest.sets) table[s.series_id][s.method_id] = s.values;
  return table;
}

// Configured in-repo methods, then external methods in first-seen order.
std::vector<std::string> pool_methods(const RunConfig& cfg, const fs::path& forecasts) {
  std::vector<std::string> pool = cfg.methods;
  std::ifstream in(forecasts);
  if (!in) throw std::runtime_error("cannot open " + forecasts.string());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    if (a == std::string::npos) continue;
    const auto b = line.find(',', a + 1);
    const std::string method = line.substr(a + 1, b == std::string::npos ? std::string::npos : b - a - 1);
    if (method.rfind("external:", 0) == 0 &&
        std::find(pool.begin(), pool.end(), method) == pool.end()) {
      pool.push_back(method);
    }
  }
  return pool;
}

std::map<std::string, int> horizon_map(const std::vector<SeriesCase>& cases) {
  std::map<std::string, int> h;
  for (const auto& c : cases) h[c.id] = c.horizon;
  return h;
}

std::map<std::string, Eigen::Index> feature_rows(const FeatureFile& ff) {
  std::map<std::string, Eigen::Index> rows;
  for (std::size_t i = 0; i < ff.records.size(); ++i) {
    rows.emplace(ff.records[i].series_id, static_cast<Eigen::Index>(i));
  }
  return rows;
}

// Rows of the feature matrix and forecasts aligned with the pool.
struct Assembled {
  std::vector<const SeriesCase*> cases;
  Eigen::MatrixXd features;
  std::vector<std::vector<Eigen::VectorXd>> forecasts;  // [series][method]
  std::vector<Eigen::VectorXd> naive2;
  std::vector<SkippedSeries> dropped;
};

Assembled assemble(const std::vector<SeriesCase>& cases, const FeatureFile& ff,
                   const ForecastTable& table, const std::vector<std::string>& pool) {
  Assembled out;
  const auto rows = feature_rows(ff);
  std::vector<Eigen::Index> picked;
  for (const auto& c : cases) {
    const auto fr = rows.find(c.id);
    if (fr == rows.end()) {
      out.dropped.push_back({c.id, 0, "no feature vector"});
      continue;
    }
    const auto ft = table.find(c.id);
    std::string missing;
    if (ft == table.end()) {
      missing = "no forecasts";
    } else {
      for (const auto& m : pool) {
        if (!ft->second.count(m)) missing = "missing forecast for " + m;
      }
      if (!ft->second.count("naive2")) missing = "missing forecast for naive2";
    }
    if (!missing.empty()) {
      out.dropped.push_back({c.id, 0, missing});
      continue;
    }
    std::vector<Eigen::VectorXd> f;
    for (const auto& m : pool) f.push_back(ft->second.at(m));
    out.forecasts.push_back(std::move(f));
    out.naive2.push_back(ft->second.at("naive2"));
    out.cases.push_back(&c);
    picked.push_back(fr->second);
  }
  const Eigen::MatrixXd all = feature_matrix(ff);
  out.features.resize(static_cast<Eigen::Index>(picked.size()), all.cols());
  for (std::size_t i = 0; i < picked.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = all.row(picked[i]);
  }
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<std::string> ordered_groups(const std::vector<std::string>& groups) {
  std::vector<std::string> out;
  for (const auto& g : frequency_groups()) {
    if (std::find(groups.begin(), groups.end(), g) != groups.end()) out.push_back(g);
  }
  for (const auto& g : groups) {
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  }
  return out;
}

constexpr int kMinModelSeries = 10;

}  // namespace

CorpusCases prepare_cases(const RunConfig& cfg) {
  CorpusCases out;
  Metadata meta;
  if (!cfg.metadata.empty()) meta = load_metadata(cfg.metadata);

  std::ifstream in(cfg.corpus);
  if (!in) throw std::runtime_error("cannot open " + cfg.corpus);
  std::vector<CorpusRejection> rejected;
  const auto rows = read_raw_corpus(in, &rejected);
  for (const auto& r : rejected) out.skipped.push_back({r.id, r.line, r.reason});

  std::map<std::string, std::vector<double>> tails;
  if (!cfg.test.empty()) {
    std::ifstream t(cfg.test);
    if (!t) throw std::runtime_error("cannot open " + cfg.test);
    std::vector<CorpusRejection> bad_tails;
    for (auto& row : read_raw_corpus(t, &bad_tails)) tails.emplace(row.id, std::move(row.values));
  }

  std::set<std::string> seen;
  for (const auto& row : rows) {
    try {
      if (!seen.insert(row.id).second) throw SeriesError(row.id, "duplicate id");
      SeriesCase c;
      c.id = row.id;
      c.period = cfg.period;
      c.horizon = cfg.horizon;
      std::string group;
      if (!meta.empty()) {
        const auto it = meta.find(row.id);
        if (it == meta.end()) throw SeriesError(row.id, "missing from metadata");
        c.period = it->second.period;
        c.horizon = it->second.horizon;
        group = it->second.group;
      }
      c.group = frequency_group(c.id, c.period, group);
      const TimeSeries full = make_series(c.id, c.period, c.horizon, to_vector(row.values));
      if (cfg.test.empty()) {
        auto split = split_train_test(full);
        c.outer_train = std::move(split.train);
        c.outer_actual = std::move(split.test);
      } else {
        const auto it = tails.find(c.id);
        if (it == tails.end()) throw SeriesError(c.id, "no test tail");
        if (static_cast<int>(it->second.size()) != c.horizon) {
          throw SeriesError(c.id, "test tail length differs from the horizon");
        }
        c.outer_actual = to_vector(it->second);
        if (!c.outer_actual.allFinite()) throw SeriesError(c.id, "non-finite test value");
        c.outer_train = full;
      }
      auto inner = split_train_test(c.outer_train);
      c.inner_train = std::move(inner.train);
      c.inner_actual = std::move(inner.test);
      out.cases.push_back(std::move(c));
    } catch (const std::exception& e) {
      out.skipped.push_back({row.id, row.line, e.what()});
    }
  }
  return out;
}

GrayImage series_image(const Eigen::VectorXd& values, const RunConfig& cfg) {
  return render(encode_series(values, cfg.rp), cfg.rp.render_size);
}

FeatureVector encode_features(const std::string& id,
                              const std::vector<Descriptor>& descriptors,
                              const Codebook& codebook, const RunConfig& cfg) {
  const int k = static_cast<int>(codebook.bases.cols());
  if (descriptors.empty() || k == 0) {
    const int bases = k == 0 ? cfg.codebook_k : k;
    return FeatureVector{id, Eigen::VectorXf::Zero(bases * kPyramidRegions)};
  }
  Eigen::MatrixXd x(kDescriptorSize, static_cast<Eigen::Index>(descriptors.size()));
  std::vector<Keypoint> keypoints;
  keypoints.reserve(descriptors.size());
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = descriptors[i].values;
    keypoints.push_back(descriptors[i].keypoint);
  }
  const auto codes = llc_code_all(x, codebook, std::min(cfg.llc_k, k), cfg.llc_lambda, 1);
  return pool(id, codes, keypoints, k, cfg.rp.render_size, cfg.pooling);
}

Projection pca_project(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n == 0) throw std::invalid_argument("pca_project: no rows");
  Projection p;
  p.points = Eigen::MatrixXd::Zero(n, 2);
  p.variances = Eigen::Vector2d::Zero();
  p.axes = Eigen::MatrixXd::Zero(d, 2);
  if (n < 2 || d == 0) return p;

  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const bool gram = n <= d;
  const Eigen::MatrixXd s = gram ? Eigen::MatrixXd(xc * xc.transpose())
                                 : Eigen::MatrixXd(xc.transpose() * xc);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const Eigen::Index size = s.rows();
  const double tiny = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, size); ++c) {
    const double lambda = eig.eigenvalues()[size - 1 - c];
    if (!(lambda > tiny)) break;
    Eigen::VectorXd axis = gram ? Eigen::VectorXd(xc.transpose() * eig.eigenvectors().col(size - 1 - c) / std::sqrt(lambda))
                                : Eigen::VectorXd(eig.eigenvectors().col(size - 1 - c));
    axis.normalize();
    Eigen::Index big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis[big] < 0.0) axis = -axis;
    p.axes.col(c) = axis;
    p.points.col(c) = xc * axis;
    p.variances[c] = lambda / static_cast<double>(n - 1);
  }
  return p;
}

json cmd_featurize(const RunConfig& cfg) {
  validate_config(cfg, true);
  Stopwatch clock;
  json timings;
  const fs::path dir = work_dir(cfg);
  CorpusCases corpus = prepare_cases(cfg);
  const auto& cases = corpus.cases;
  const std::size_t n = cases.size();
  timings["load"] = clock.lap();

  std::vector<std::vector<Descriptor>> inner(n), outer(n);
  std::vector<std::string> errors(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    try {
      inner[i] = extract_sift(series_image(cases[i].inner_train.values, cfg), cfg.sift);
      outer[i] = extract_sift(series_image(cases[i].outer_train.values, cfg), cfg.sift);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  timings["sift"] = clock.lap();

  std::size_t total = 0, total_outer = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) continue;
    total += inner[i].size();
    total_outer += outer[i].size();
  }

  Codebook codebook;
  json codebook_info;
  if (total > 0) {
    Eigen::MatrixXd pool(kDescriptorSize, static_cast<Eigen::Index>(total));
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!errors[i].empty()) continue;
      for (const auto& d : inner[i]) pool.col(col++) = d.values;
    }
    const Eigen::MatrixXd sample =
        subsample_columns(pool, static_cast<Eigen::Index>(cfg.codebook_cap), derive_seed(cfg.seed, "codebook-sample"));
    pool.resize(0, 0);
    KMeansReport report;
    codebook = train_codebook(
        sample, KMeansParams{cfg.codebook_k, derive_seed(cfg.seed, "kmeans"), cfg.kmeans_iters, cfg.kmeans_tol},
        &report);
    save_codebook(codebook, (dir / files::kCodebook).string());
    codebook_info = {{"k", codebook.bases.cols()},
                     {"samples", sample.cols()},
                     {"iterations", report.iterations},
                     {"reseeded", report.reseeded},
                     {"reduced_k", report.reduced_k}};
  } else {
    codebook_info = {{"k", 0}, {"samples", 0}, {"note", "no descriptors; features are zero"}};
  }
  timings["codebook"] = clock.lap();

  const int k_eff = total > 0 ? static_cast<int>(codebook.bases.cols()) : cfg.codebook_k;
  std::vector<FeatureVector> train_feats(n), test_feats(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    if (!errors[i].empty()) return;
    train_feats[i] = encode_features(cases[i].id, inner[i], codebook, cfg);
    test_feats[i] = encode_features(cases[i].id, outer[i], codebook, cfg);
  });
  timings["encode"] = clock.lap();

  FeatureFile train_file{static_cast<std::uint32_t>(k_eff), kPyramidRegions, {}};
  FeatureFile test_file = train_file;
  json zero_train = json::array(), zero_test = json::array();
  std::size_t ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      corpus.skipped.push_back({cases[i].id, 0, errors[i]});
      continue;
    }
    ++ok;
    if (inner[i].empty()) zero_train.push_back(cases[i].id);
    if (outer[i].empty()) zero_test.push_back(cases[i].id);
    train_file.records.push_back(std::move(train_feats[i]));
    test_file.records.push_back(std::move(test_feats[i]));
  }
  write_feature_file(train_file, (dir / files::kFeaturesTrain).string());
  write_feature_file(test_file, (dir / files::kFeaturesTest).string());
  timings["write"] = clock.lap();

  json manifest = {{"ok", ok},
                   {"skipped", corpus.skipped.size()},
                   {"skipped_series", skipped_json(corpus.skipped)},
                   {"feature_dim", train_file.dim()},
                   {"descriptors_train", total},
                   {"descriptors_test", total_outer},
                   {"zero_keypoint_train", zero_train},
                   {"zero_keypoint_test", zero_test},
                   {"codebook", codebook_info},
                   {"timings_seconds", timings}};
  write_json(dir / files::kFeaturizeManifest, manifest);
  return manifest;
}

json cmd_forecast(const RunConfig& cfg) {
  validate_config(cfg, true);
  const fs::path dir = work_dir(cfg);
  CorpusCases corpus = prepare_cases(cfg);
  const auto& cases = corpus.cases;
  const std::size_t n = cases.size();

  std::vector<std::string> methods = cfg.methods;
  if (std::find(methods.begin(), methods.end(), "naive2") == methods.end()) methods.push_back("naive2");

  struct Result {
    std::vector<ForecastSet> inner, outer;
    std::vector<std::string> fallbacks;
    std::string error;
  };
  std::vector<Result> results(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    Result& r = results[i];
    try {
      for (const auto& m : methods) {
        Diagnostics d1, d2;
        r.inner.push_back({cases[i].id, m, run_method(m, cases[i].inner_train, &d1)});
        r.outer.push_back({cases[i].id, m, run_method(m, cases[i].outer_train, &d2)});
        if (d1.fallback || d2.fallback) r.fallbacks.push_back(m);
      }
    } catch (const std::exception& e) {
      r.error = e.what();
      r.inner.clear();
      r.outer.clear();
    }
  });

  std::vector<ForecastSet> inner, outer;
  std::map<std::string, int> fallback_counts;
  std::map<std::string, int> horizons;
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i].error.empty()) {
      corpus.skipped.push_back({cases[i].id, 0, results[i].error});
      continue;
    }
    horizons[cases[i].id] = cases[i].horizon;
    for (const auto& m : results[i].fallbacks) ++fallback_counts[m];
    for (auto& s : results[i].inner) inner.push_back(std::move(s));
    for (auto& s : results[i].outer) outer.push_back(std::move(s));
  }

  json rejected = json::array();
  auto merge = [&](const std::vector<std::string>& paths, std::vector<ForecastSet>& into) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& s : into) seen.emplace(s.series_id, s.method_id);
    for (const auto& path : paths) {
      ForecastIngest ingest = ingest_external_forecasts(path, horizons);
      for (const auto& r : ingest.rejected) {
        rejected.push_back({{"file", path}, {"line", r.line}, {"id", r.series_id}, {"reason", r.reason}});
      }
      for (auto& s : ingest.sets) {
        if (!seen.emplace(s.series_id, s.method_id).second) {
          rejected.push_back({{"file", path}, {"line", 0}, {"id", s.series_id},
                              {"reason", "duplicate forecast for " + s.method_id}});
          continue;
        }
        into.push_back(std::move(s));
      }
    }
  };
  merge(cfg.external_train, inner);
  merge(cfg.external_test, outer);

  write_forecasts(inner, (dir / files::kForecastsTrain).string());
  write_forecasts(outer, (dir / files::kForecastsTest).string());

  json manifest = {{"ok", horizons.size()},
                   {"skipped", corpus.skipped.size()},
                   {"skipped_series", skipped_json(corpus.skipped)},
                   {"methods", methods},
                   {"rows_train", inner.size()},
                   {"rows_test", outer.size()},
                   {"fallbacks", fallback_counts},
                   {"external_rejected", rejected}};
  write_json(dir / files::kForecastManifest, manifest);
  return manifest;
}

json cmd_train(const RunConfig& cfg) {
  validate_config(cfg, true);
  const fs::path dir = work_dir(cfg);
  const CorpusCases corpus = prepare_cases(cfg);
  const FeatureFile ff = read_feature_file((dir / files::kFeaturesTrain).string());
  const auto pool = pool_methods(cfg, dir / files::kForecastsTrain);
  const ForecastTable table = read_forecast_table(dir / files::kForecastsTrain, horizon_map(corpus.cases));
  const Assembled data = assemble(corpus.cases, ff, table, pool);
  const Eigen::Index n = data.features.rows();
  if (n < kMinModelSeries) {
    throw std::runtime_error("training needs at least 10 complete series, found " + std::to_string(n));
  }

  std::vector<SeriesOutcome> outcomes;
  for (Eigen::Index i = 0; i < n; ++i) {
    const SeriesCase& c = *data.cases[static_cast<std::size_t>(i)];
    outcomes.push_back({c.id, c.group, c.inner_train.values, c.inner_actual, c.period,
                        data.naive2[static_cast<std::size_t>(i)],
                        data.forecasts[static_cast<std::size_t>(i)]});
  }
  const LossMatrix losses = build_loss_matrix(outcomes, pool);
  write_loss_csv(losses, (dir / files::kLossesTrain).string());

  // Partition into models: one per sufficiently large group, the rest pooled.
  std::vector<std::pair<std::string, std::vector<Eigen::Index>>> models;
  std::vector<Eigen::Index> leftover;
  if (cfg.per_group) {
    for (const auto& g : ordered_groups(losses.groups)) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (losses.groups[static_cast<std::size_t>(i)] == g) rows.push_back(i);
      }
      if (static_cast<int>(rows.size()) >= kMinModelSeries) {
        models.emplace_back(g, std::move(rows));
      } else {
        leftover.insert(leftover.end(), rows.begin(), rows.end());
      }
    }
  }
  const bool need_all = !cfg.per_group || !leftover.empty();
  if (need_all) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    models.emplace_back("all", std::move(all));
  }

  BoostingOptions options;
  options.threads = cfg.threads;
  std::ofstream curve(dir / files::kLossCurve);
  std::ofstream cv_out(dir / files::kCvReport);
  if (!curve || !cv_out) throw std::runtime_error("cannot write training reports");
  curve.precision(17);
  cv_out.precision(17);
  curve << "model,round,loss\n";
  cv_out << "model,config,max_depth,learning_rate,subsample_rows,subsample_cols,rounds,mean_loss,selected\n";

  json index = {{"methods", pool}, {"feature_dim", data.features.cols()}, {"models", json::object()}};
  json summary_models = json::array();
  for (const auto& [name, rows] : models) {
    const Eigen::MatrixXd x = take_rows(data.features, rows);
    const Eigen::MatrixXd o = take_rows(losses.owa, rows);
    const std::uint64_t seed = derive_seed(cfg.seed, "model:" + name);
    HyperParams hp = cfg.hyper;
    if (cfg.cv_budget > 0) {
      const int folds = std::min<int>(cfg.cv_folds, static_cast<int>(rows.size()));
      const CvResult cv = cv_search(x, o, SearchSpace{}, folds, cfg.cv_budget, seed, hp, options);
      for (std::size_t c = 0; c < cv.configs.size(); ++c) {
        const auto& h = cv.configs[c];
        cv_out << name << ',' << c << ',' << h.max_depth << ',' << h.learning_rate << ','
               << h.subsample_rows << ',' << h.subsample_cols << ',' << h.rounds << ','
               << cv.mean_loss[c] << ',' << (static_cast<int>(c) == cv.selected ? 1 : 0) << '\n';
      }
      hp = cv.best;
    }
    const WeightModel model = train_weight_model(x, o, hp, seed, options);
    const std::string file = "model_" + file_stem(name) + ".bin";
    save_weight_model(model, (dir / file).string());
    for (std::size_t r = 0; r < model.train_loss.size(); ++r) {
      curve << name << ',' << r << ',' << model.train_loss[r] << '\n';
    }
    if (name == "all" && cfg.per_group) {
      index["fallback"] = file;
    } else {
      index["models"][name] = file;
    }
    const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(o.rows(), o.cols(), 1.0 / static_cast<double>(o.cols()));
    summary_models.push_back({{"model", name},
                              {"series", rows.size()},
                              {"params", hp.describe()},
                              {"train_loss", model.train_loss.back()},
                              {"uniform_loss", mean_weighted_loss(uniform, o)}});
  }
  write_json(dir / files::kModelIndex, index);

  return {{"series", n},
          {"dropped", skipped_json(data.dropped)},
          {"methods", pool},
          {"models", summary_models}};
}

json cmd_evaluate(const RunConfig& cfg) {
  validate_config(cfg, true);
  const fs::path dir = work_dir(cfg);
  const CorpusCases corpus = prepare_cases(cfg);
  const json index = read_json(dir / files::kModelIndex);
  const auto pool = index.at("methods").get<std::vector<std::string>>();

  std::map<std::string, WeightModel> models;
  for (const auto& [group, file] : index.at("models").items()) {
    models.emplace(group, load_weight_model((dir / file.get<std::string>()).string()));
  }
  std::optional<WeightModel> fallback;
  if (index.contains("fallback")) {
    fallback = load_weight_model((dir / index.at("fallback").get<std::string>()).string());
  }

  const FeatureFile ff = read_feature_file((dir / files::kFeaturesTest).string());
  const ForecastTable table = read_forecast_table(dir / files::kForecastsTest, horizon_map(corpus.cases));
  const Assembled data = assemble(corpus.cases, ff, table, pool);
  const Eigen::Index n = data.features.rows();
  if (n == 0) throw std::runtime_error("no complete series to evaluate");
  const auto m = static_cast<Eigen::Index>(pool.size());

  std::vector<std::string> methods = pool;
  const bool naive2_in_pool = std::find(pool.begin(), pool.end(), "naive2") != pool.end();
  if (!naive2_in_pool) methods.push_back("naive2");
  methods.push_back(kCombinationId);

  std::ofstream weights_out(dir / files::kWeightsTest);
  if (!weights_out) throw std::runtime_error("cannot write weights");
  weights_out.precision(17);
  weights_out << "id,group";
  for (const auto& p : pool) weights_out << ',' << p;
  weights_out << '\n';

  int uniform_weights = 0;
  std::vector<SeriesOutcome> outcomes;
  for (Eigen::Index i = 0; i < n; ++i) {
    const SeriesCase& c = *data.cases[static_cast<std::size_t>(i)];
    const auto& f = data.forecasts[static_cast<std::size_t>(i)];
    const WeightModel* model = nullptr;
    if (const auto it = models.find(c.group); it != models.end()) model = &it->second;
    else if (fallback) model = &*fallback;
    Eigen::VectorXd w;
    if (model) {
      w = model->predict_weights(data.features.row(i));
    } else {
      w = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
      ++uniform_weights;
    }
    Eigen::MatrixXd stacked(m, c.horizon);
    for (Eigen::Index k = 0; k < m; ++k) stacked.row(k) = f[static_cast<std::size_t>(k)].transpose();

    SeriesOutcome o{c.id, c.group, c.outer_train.values, c.outer_actual, c.period,
                    data.naive2[static_cast<std::size_t>(i)], f};
    if (!naive2_in_pool) o.forecasts.push_back(o.naive2);
    o.forecasts.push_back(combine_forecasts(w, stacked));
    outcomes.push_back(std::move(o));

    weights_out << c.id << ',' << c.group;
    for (Eigen::Index k = 0; k < m; ++k) weights_out << ',' << w[k];
    weights_out << '\n';
  }

  const LossMatrix losses = build_loss_matrix(outcomes, methods);
  write_loss_csv(losses, (dir / files::kLossesTest).string());
  const AggregateTable agg = aggregate(losses, "naive2");
  write_aggregate_csv(agg, (dir / files::kReportCsv).string());
  {
    std::ofstream out(dir / files::kReportText);
    if (!out) throw std::runtime_error("cannot write report");
    out << "series evaluated: " << n << '\n'
        << "series dropped: " << data.dropped.size() << '\n'
        << "uniform-weight fallbacks: " << uniform_weights << "\n\n"
        << format_table(agg);
  }

  json totals = json::object();
  const std::size_t total_col = agg.columns.size() - 1;
  for (std::size_t j = 0; j < methods.size(); ++j) {
    const auto& cell = agg.cells[j][total_col];
    totals[methods[j]] = {{"smape", cell.smape}, {"mase", cell.mase}, {"owa", cell.owa}};
  }
  return {{"series", n},
          {"dropped", skipped_json(data.dropped)},
          {"uniform_weight_fallbacks", uniform_weights},
          {"total", totals}};
}

json cmd_plot(const RunConfig& cfg) {
  validate_config(cfg, true);
  const fs::path dir = work_dir(cfg) / files::kPlotDir;
  fs::create_directories(dir);
  CorpusCases corpus = prepare_cases(cfg);
  const auto& cases = corpus.cases;
  std::vector<std::string> errors(cases.size());
  parallel_for(cases.size(), cfg.threads, [&](std::size_t i) {
    try {
      write_pgm(series_image(cases[i].outer_train.values, cfg),
                (dir / (file_stem(cases[i].id) + ".pgm")).string());
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::size_t ok = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (errors[i].empty()) ++ok;
    else corpus.skipped.push_back({cases[i].id, 0, errors[i]});
  }
  return {{"written", ok}, {"directory", dir.string()}, {"skipped_series", skipped_json(corpus.skipped)}};
}

json cmd_project(const RunConfig& cfg, const std::string& features) {
  validate_config(cfg, false);
  const fs::path dir = work_dir(cfg);
  const fs::path source = features.empty() ? dir / files::kFeaturesTest : fs::path(features);
  const FeatureFile ff = read_feature_file(source.string());
  if (ff.records.empty()) throw std::runtime_error("feature file has no records");
  Metadata meta;
  if (!cfg.metadata.empty()) meta = load_metadata(cfg.metadata);
  const Projection p = pca_project(feature_matrix(ff));

  std::ofstream out(dir / files::kProjection);
  if (!out) throw std::runtime_error("cannot write projection");
  out.precision(17);
  out << "id,group,pc1,pc2\n";
  for (std::size_t i = 0; i < ff.records.size(); ++i) {
    const auto& id = ff.records[i].series_id;
    const auto it = meta.find(id);
    const std::string group = it == meta.end() ? frequency_group(id, cfg.period)
                                               : frequency_group(id, it->second.period, it->second.group);
    const auto r = static_cast<Eigen::Index>(i);
    out << id << ',' << group << ',' << p.points(r, 0) << ',' << p.points(r, 1) << '\n';
  }
  return {{"points", ff.records.size()},
          {"variance", {p.variances[0], p.variances[1]}},
          {"output", (dir / files::kProjection).string()}};
}

}  // namespace sbof
