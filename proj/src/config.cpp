#include "sbof/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "sbof/forecasters.hpp"

namespace sbof {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) bad_value(key, v);
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v);
  }
  if (used != v.size()) bad_value(key, v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v);
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string real(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

struct Field {
  const char* key;
  const char* help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SBOF_INT(name, member, help)                                                  \
  Field {                                                                             \
    name, help,                                                                       \
        [](RunConfig& c, const std::string& v) {                                      \
          c.member = static_cast<decltype(c.member)>(to_int(name, v));                \
        },                                                                            \
        [](const RunConfig& c) { return std::to_string(c.member); }                   \
  }
#define SBOF_REAL(name, member, help)                                                 \
  Field {                                                                             \
    name, help, [](RunConfig& c, const std::string& v) { c.member = to_real(name, v); }, \
        [](const RunConfig& c) { return real(c.member); }                             \
  }
#define SBOF_TEXT(name, member, help)                                                 \
  Field {                                                                             \
    name, help, [](RunConfig& c, const std::string& v) { c.member = v; },             \
        [](const RunConfig& c) { return c.member; }                                   \
  }
#define SBOF_LIST(name, member, help)                                                 \
  Field {                                                                             \
    name, help, [](RunConfig& c, const std::string& v) { c.member = to_list(v); },    \
        [](const RunConfig& c) { return join(c.member); }                             \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SBOF_TEXT("corpus", corpus, "training corpus, M4 layout"),
      SBOF_TEXT("test", test, "held-out tails, M4 layout (empty: split the corpus)"),
      SBOF_TEXT("metadata", metadata, "id,period,horizon[,group] table (empty: use period/horizon)"),
      SBOF_TEXT("work_dir", work_dir, "directory for every output"),
      SBOF_INT("period", period, "seasonal period without metadata"),
      SBOF_INT("horizon", horizon, "forecast horizon without metadata"),
      SBOF_REAL("rp.eps", rp.eps, "recurrence clipping threshold"),
      SBOF_INT("rp.steps", rp.steps, "quantization levels below eps"),
      SBOF_INT("rp.size", rp.render_size, "rendered image side in pixels"),
      SBOF_INT("sift.scales", sift.scales_per_octave, "scales per octave"),
      SBOF_INT("sift.octaves", sift.octaves, "octave count (0: floor(log2 size) - 2)"),
      SBOF_REAL("sift.sigma", sift.sigma, "base blur"),
      SBOF_REAL("sift.contrast", sift.contrast_threshold, "contrast threshold on [0,1] intensities"),
      SBOF_REAL("sift.edge_ratio", sift.edge_ratio, "principal curvature ratio limit"),
      SBOF_REAL("sift.peak_ratio", sift.peak_ratio, "secondary orientation peak ratio"),
      SBOF_REAL("sift.clip", sift.descriptor_clip, "descriptor clipping value"),
      SBOF_INT("codebook.k", codebook_k, "number of bases"),
      SBOF_INT("codebook.cap", codebook_cap, "max descriptors used for k-means"),
      SBOF_INT("codebook.iters", kmeans_iters, "Lloyd iteration limit"),
      SBOF_REAL("codebook.tol", kmeans_tol, "relative inertia tolerance"),
      SBOF_INT("llc.k", llc_k, "nearest bases per descriptor"),
      SBOF_REAL("llc.lambda", llc_lambda, "ridge factor"),
      Field{"spm.pooling", "signed or absolute max pooling",
            [](RunConfig& c, const std::string& v) {
              if (v == "signed") c.pooling = PoolingMode::Signed;
              else if (v == "absolute") c.pooling = PoolingMode::Absolute;
              else bad_value("spm.pooling", v);
            },
            [](const RunConfig& c) {
              return std::string(c.pooling == PoolingMode::Signed ? "signed" : "absolute");
            }},
      SBOF_LIST("pool.methods", methods, "in-repo methods forming the pool"),
      SBOF_LIST("pool.external_train", external_train, "external forecast CSVs, inner split"),
      SBOF_LIST("pool.external_test", external_test, "external forecast CSVs, outer split"),
      SBOF_INT("gbm.max_depth", hyper.max_depth, "tree depth, 6..50"),
      SBOF_REAL("gbm.learning_rate", hyper.learning_rate, "shrinkage, 0.001..1"),
      SBOF_REAL("gbm.subsample_rows", hyper.subsample_rows, "row fraction per tree, 0.5..1"),
      SBOF_REAL("gbm.subsample_cols", hyper.subsample_cols, "feature fraction per tree, 0.5..1"),
      SBOF_INT("gbm.rounds", hyper.rounds, "boosting rounds, 1..250"),
      SBOF_INT("cv.budget", cv_budget, "random-search configurations (0: use gbm.*)"),
      SBOF_INT("cv.folds", cv_folds, "cross-validation folds"),
      Field{"combiner.per_group", "one model per frequency group",
            [](RunConfig& c, const std::string& v) { c.per_group = to_bool("combiner.per_group", v); },
            [](const RunConfig& c) { return std::string(c.per_group ? "true" : "false"); }},
      Field{"seed", "single source of randomness",
            [](RunConfig& c, const std::string& v) {
              const long long s = to_int("seed", v);
              if (s < 0) bad_value("seed", v);
              c.seed = static_cast<std::uint64_t>(s);
            },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      SBOF_INT("threads", threads, "worker threads"),
  };
  return table;
}

#undef SBOF_INT
#undef SBOF_REAL
#undef SBOF_TEXT
#undef SBOF_LIST

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + what);
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, trim(value));
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  return parse_config(in, std::move(base));
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("override must be key=value: " + o);
    set_config_value(cfg, trim(o.substr(0, eq)), o.substr(eq + 1));
  }
}

std::string format_config(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& f : fields()) {
    out << "# " << f.help << '\n' << f.key << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

void validate_config(const RunConfig& cfg, bool check_paths) {
  require(cfg.period >= 1, "period must be >= 1");
  require(cfg.horizon >= 1, "horizon must be >= 1");
  require(cfg.rp.eps > 0.0 && cfg.rp.eps <= 1.0, "rp.eps must be in (0, 1]");
  require(cfg.rp.steps >= 1, "rp.steps must be >= 1");
  require(cfg.rp.render_size >= 16 && cfg.rp.render_size <= 4096, "rp.size must be in [16, 4096]");
  require(cfg.sift.scales_per_octave >= 3 && cfg.sift.scales_per_octave <= 10, "sift.scales must be in [3, 10]");
  require(cfg.sift.octaves >= 0, "sift.octaves must be >= 0");
  require(cfg.sift.sigma > 0.0, "sift.sigma must be positive");
  require(cfg.sift.contrast_threshold >= 0.0, "sift.contrast must be >= 0");
  require(cfg.sift.edge_ratio > 1.0, "sift.edge_ratio must exceed 1");
  require(cfg.sift.peak_ratio > 0.0 && cfg.sift.peak_ratio <= 1.0, "sift.peak_ratio must be in (0, 1]");
  require(cfg.sift.descriptor_clip > 0.0 && cfg.sift.descriptor_clip <= 1.0, "sift.clip must be in (0, 1]");
  require(cfg.codebook_k >= 1 && cfg.codebook_k <= 65535, "codebook.k must be in [1, 65535]");
  require(cfg.codebook_cap >= cfg.codebook_k, "codebook.cap must be >= codebook.k");
  require(cfg.kmeans_iters >= 1, "codebook.iters must be >= 1");
  require(cfg.kmeans_tol >= 0.0, "codebook.tol must be >= 0");
  require(cfg.llc_k >= 1 && cfg.llc_k <= cfg.codebook_k, "llc.k must be in [1, codebook.k]");
  require(cfg.llc_lambda >= 0.0, "llc.lambda must be >= 0");
  require(!cfg.methods.empty() || !cfg.external_train.empty(), "pool is empty");
  for (const auto& m : cfg.methods) require(is_builtin_method(m), "unknown method '" + m + "'");
  require(cfg.external_train.size() == cfg.external_test.size(),
          "pool.external_train and pool.external_test must pair up");
  try {
    cfg.hyper.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config: gbm: ") + e.what());
  }
  require(cfg.hyper.rounds >= 1, "gbm.rounds must be >= 1");
  require(cfg.cv_budget >= 0, "cv.budget must be >= 0");
  require(cfg.cv_folds >= 2, "cv.folds must be >= 2");
  require(cfg.threads >= 1 && cfg.threads <= 256, "threads must be in [1, 256]");
  require(!cfg.work_dir.empty(), "work_dir must be set");
  if (!check_paths) return;
  namespace fs = std::filesystem;
  require(!cfg.corpus.empty(), "corpus must be set");
  require(fs::is_regular_file(cfg.corpus), "corpus not found: " + cfg.corpus);
  if (!cfg.test.empty()) require(fs::is_regular_file(cfg.test), "test not found: " + cfg.test);
  if (!cfg.metadata.empty()) {
    require(fs::is_regular_file(cfg.metadata), "metadata not found: " + cfg.metadata);
  }
  for (const auto* list : {&cfg.external_train, &cfg.external_test}) {
    for (const auto& p : *list) require(fs::is_regular_file(p), "forecast file not found: " + p);
  }
}

}  // namespace sbof
