#include "sbof/combiner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "sbof/binary_io.hpp"
#include "sbof/parallel.hpp"

namespace sbof {

namespace {

constexpr io::Magic kModelMagic = io::make_magic("SBOFGBM1");

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

// Sorted sample of `count` distinct indices from [0, n), by partial
// Fisher-Yates.
std::vector<int> sample_indices(int n, int count, std::mt19937_64& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (count >= n) return idx;
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

int subsample_count(int n, double rate) {
  return std::clamp(static_cast<int>(std::lround(rate * n)), 1, n);
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureBins& bins, const Eigen::VectorXd& grad,
              const Eigen::VectorXd& hess, std::vector<int> features,
              const HyperParams& params, const BoostingOptions& options)
      : bins_(bins), grad_(grad), hess_(hess), features_(std::move(features)),
        params_(params), options_(options) {}

  RegressionTree build(std::vector<int> rows) {
    tree_.nodes.clear();
    double g = 0.0, h = 0.0;
    for (int r : rows) {
      g += grad_[r];
      h += hess_[r];
    }
    grow(rows, 0, g, h);
    return std::move(tree_);
  }

 private:
  struct Split {
    double gain = 0.0;
    int feature = -1;
    int bin = -1;
    double left_g = 0.0, left_h = 0.0;
  };

  double score(double g, double h) const { return g * g / (h + options_.lambda); }

  Split best_split(const std::vector<int>& rows, double g, double h) {
    Split best;
    const double parent = score(g, h);
    for (int f : features_) {
      const auto& cuts = bins_.cuts[static_cast<std::size_t>(f)];
      const int nb = static_cast<int>(cuts.size()) + 1;
      hist_g_.assign(static_cast<std::size_t>(nb), 0.0);
      hist_h_.assign(static_cast<std::size_t>(nb), 0.0);
      hist_n_.assign(static_cast<std::size_t>(nb), 0);
      const auto col = bins_.codes.col(f);
      for (int r : rows) {
        const int b = col[r];
        hist_g_[static_cast<std::size_t>(b)] += grad_[r];
        hist_h_[static_cast<std::size_t>(b)] += hess_[r];
        hist_n_[static_cast<std::size_t>(b)] += 1;
      }
      // The floored Hessian is ~0 near uniform weights, so the child weight
      // bound counts rows rather than summing Hessians.
      const double total = static_cast<double>(rows.size());
      double gl = 0.0, hl = 0.0, nl = 0.0;
      for (int b = 0; b + 1 < nb; ++b) {
        gl += hist_g_[static_cast<std::size_t>(b)];
        hl += hist_h_[static_cast<std::size_t>(b)];
        nl += hist_n_[static_cast<std::size_t>(b)];
        const double gr = g - gl;
        const double hr = h - hl;
        if (nl < options_.min_child_weight || total - nl < options_.min_child_weight) continue;
        const double gain = score(gl, hl) + score(gr, hr) - parent;
        if (gain > best.gain) best = Split{gain, f, b, gl, hl};
      }
    }
    return best;
  }

  int grow(std::vector<int>& rows, int depth, double g, double h) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    Split split;
    if (depth < params_.max_depth && rows.size() >= 2) split = best_split(rows, g, h);
    if (split.feature < 0 || !(split.gain > 1e-12)) {
      tree_.nodes[static_cast<std::size_t>(id)].value =
          -g / (h + options_.lambda) * params_.learning_rate;
      return id;
    }
    std::vector<int> left, right;
    const auto col = bins_.codes.col(split.feature);
    for (int r : rows) (col[r] <= split.bin ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const double threshold =
        bins_.cuts[static_cast<std::size_t>(split.feature)][static_cast<std::size_t>(split.bin)];
    const int l = grow(left, depth + 1, split.left_g, split.left_h);
    const int r = grow(right, depth + 1, g - split.left_g, h - split.left_h);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const FeatureBins& bins_;
  const Eigen::VectorXd& grad_;
  const Eigen::VectorXd& hess_;
  std::vector<int> features_;
  HyperParams params_;
  BoostingOptions options_;
  RegressionTree tree_;
  std::vector<double> hist_g_, hist_h_, hist_n_;
};

void write_tree(std::ostream& out, const RegressionTree& tree) {
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tree.nodes.size()));
  for (const auto& n : tree.nodes) {
    io::write_pod<std::int32_t>(out, n.feature);
    io::write_pod<double>(out, n.threshold);
    io::write_pod<std::int32_t>(out, n.left);
    io::write_pod<std::int32_t>(out, n.right);
    io::write_pod<double>(out, n.value);
  }
}

RegressionTree read_tree(std::istream& in) {
  RegressionTree tree;
  const auto count = io::read_pod<std::uint32_t>(in);
  tree.nodes.resize(count);
  for (auto& n : tree.nodes) {
    n.feature = io::read_pod<std::int32_t>(in);
    n.threshold = io::read_pod<double>(in);
    n.left = io::read_pod<std::int32_t>(in);
    n.right = io::read_pod<std::int32_t>(in);
    n.value = io::read_pod<double>(in);
    if (n.feature >= 0 && (n.left < 0 || n.right < 0 ||
                           n.left >= static_cast<int>(count) ||
                           n.right >= static_cast<int>(count))) {
      throw std::runtime_error("corrupt tree node");
    }
  }
  return tree;
}

}  // namespace

double softmax_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& owa) {
  return softmax(p).dot(owa);
}

Eigen::VectorXd softmax_gradient(const Eigen::VectorXd& p, const Eigen::VectorXd& owa) {
  const Eigen::VectorXd w = softmax(p);
  const double loss = w.dot(owa);
  return (w.array() * (owa.array() - loss)).matrix();
}

Eigen::VectorXd softmax_hessian_diag(const Eigen::VectorXd& p, const Eigen::VectorXd& owa) {
  const Eigen::VectorXd w = softmax(p);
  const double loss = w.dot(owa);
  return (w.array() * (owa.array() - loss) * (1.0 - 2.0 * w.array())).matrix();
}

void HyperParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (max_depth < 6 || max_depth > 50) fail("max_depth outside [6, 50]");
  if (!(learning_rate >= 0.001 && learning_rate <= 1.0)) fail("learning_rate outside [0.001, 1]");
  if (!(subsample_rows >= 0.5 && subsample_rows <= 1.0)) fail("subsample_rows outside [0.5, 1]");
  if (!(subsample_cols >= 0.5 && subsample_cols <= 1.0)) fail("subsample_cols outside [0.5, 1]");
  if (rounds < 0 || rounds > 250) fail("rounds outside [0, 250]");
}

std::string HyperParams::describe() const {
  std::ostringstream s;
  s.precision(6);
  s << "max_depth=" << max_depth << " learning_rate=" << learning_rate
    << " subsample_rows=" << subsample_rows << " subsample_cols=" << subsample_cols
    << " rounds=" << rounds;
  return s.str();
}

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  if (nodes.empty()) return 0.0;
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x[n.feature] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.feature < 0) continue;
    level[static_cast<std::size_t>(n.left)] = level[i] + 1;
    level[static_cast<std::size_t>(n.right)] = level[i] + 1;
    deepest = std::max(deepest, level[i] + 1);
  }
  return deepest;
}

Eigen::VectorXd WeightModel::scores(const Eigen::Ref<const Eigen::RowVectorXd>& f) const {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(methods);
  for (const auto& round : rounds) {
    for (int m = 0; m < methods; ++m) p[m] += round[static_cast<std::size_t>(m)].predict(f);
  }
  return p;
}

Eigen::VectorXd WeightModel::predict_weights(const Eigen::Ref<const Eigen::RowVectorXd>& f) const {
  if (f.size() != features) throw std::invalid_argument("feature dimension mismatch");
  return softmax(scores(f));
}

Eigen::MatrixXd WeightModel::predict_batch(const Eigen::MatrixXd& x) const {
  if (x.cols() != features) throw std::invalid_argument("feature dimension mismatch");
  Eigen::MatrixXd w(x.rows(), methods);
  for (Eigen::Index i = 0; i < x.rows(); ++i) w.row(i) = softmax(scores(x.row(i))).transpose();
  return w;
}

FeatureBins bin_features(const Eigen::MatrixXd& x, int max_bins) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  FeatureBins bins;
  bins.cuts.resize(static_cast<std::size_t>(d));
  bins.codes.resize(n, d);
  std::vector<double> sorted(static_cast<std::size_t>(n));
  for (Eigen::Index f = 0; f < d; ++f) {
    for (Eigen::Index i = 0; i < n; ++i) sorted[static_cast<std::size_t>(i)] = x(i, f);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> uniq;
    std::unique_copy(sorted.begin(), sorted.end(), std::back_inserter(uniq));
    auto& cuts = bins.cuts[static_cast<std::size_t>(f)];
    if (static_cast<int>(uniq.size()) <= max_bins) {
      for (std::size_t u = 1; u < uniq.size(); ++u) cuts.push_back(0.5 * (uniq[u - 1] + uniq[u]));
    } else {
      for (int b = 1; b < max_bins; ++b) {
        const auto pos = static_cast<std::size_t>(
            static_cast<double>(b) * static_cast<double>(n) / max_bins);
        if (pos == 0 || pos >= sorted.size()) continue;
        if (sorted[pos - 1] == sorted[pos]) continue;
        const double cut = 0.5 * (sorted[pos - 1] + sorted[pos]);
        if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto it = std::upper_bound(cuts.begin(), cuts.end(), x(i, f));
      bins.codes(i, f) = static_cast<std::uint8_t>(it - cuts.begin());
    }
  }
  return bins;
}

WeightModel train_weight_model(const Eigen::MatrixXd& features,
                               const Eigen::MatrixXd& owa,
                               const HyperParams& params, std::uint64_t seed,
                               const BoostingOptions& options) {
  params.validate();
  const int n = static_cast<int>(features.rows());
  const int d = static_cast<int>(features.cols());
  const int m = static_cast<int>(owa.cols());
  if (owa.rows() != n) throw std::invalid_argument("features and losses differ in rows");
  if (n < 10) throw std::invalid_argument("training needs at least 10 series");
  if (m < 2) throw std::invalid_argument("training needs at least 2 methods");
  if (!features.allFinite() || !owa.allFinite() || (owa.array() < 0.0).any()) {
    throw std::invalid_argument("features must be finite and losses finite, non-negative");
  }

  WeightModel model;
  model.methods = m;
  model.features = d;
  model.params = params;
  model.seed = seed;

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, m);
  auto mean_loss = [&] {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += softmax_loss(scores.row(i).transpose(), owa.row(i).transpose());
    return acc / n;
  };
  model.train_loss.push_back(mean_loss());

  const FeatureBins bins = bin_features(features, options.max_bins);
  std::vector<int> usable;
  for (int f = 0; f < d; ++f) {
    if (!bins.cuts[static_cast<std::size_t>(f)].empty()) usable.push_back(f);
  }
  if (usable.empty()) return model;  // constant features: uniform weights

  Eigen::MatrixXd grad(n, m), hess(n, m);
  for (int round = 0; round < params.rounds; ++round) {
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd p = scores.row(i).transpose();
      const Eigen::VectorXd o = owa.row(i).transpose();
      grad.row(i) = softmax_gradient(p, o).transpose();
      hess.row(i) = softmax_hessian_diag(p, o).cwiseMax(kHessianFloor).transpose();
    }
    std::vector<RegressionTree> trees(static_cast<std::size_t>(m));
    parallel_for(static_cast<std::size_t>(m), options.threads, [&](std::size_t k) {
      auto rng = stream_rng(seed, static_cast<std::uint64_t>(round), k);
      std::vector<int> rows = sample_indices(n, subsample_count(n, params.subsample_rows), rng);
      const auto picked = sample_indices(static_cast<int>(usable.size()),
                                         subsample_count(static_cast<int>(usable.size()),
                                                         params.subsample_cols),
                                         rng);
      std::vector<int> cols;
      cols.reserve(picked.size());
      for (int c : picked) cols.push_back(usable[static_cast<std::size_t>(c)]);
      const Eigen::VectorXd g = grad.col(static_cast<Eigen::Index>(k));
      const Eigen::VectorXd h = hess.col(static_cast<Eigen::Index>(k));
      TreeBuilder builder(bins, g, h, std::move(cols), params, options);
      trees[k] = builder.build(std::move(rows));
    });
    for (int k = 0; k < m; ++k) {
      const auto& tree = trees[static_cast<std::size_t>(k)];
      for (int i = 0; i < n; ++i) scores(i, k) += tree.predict(features.row(i));
    }
    model.rounds.push_back(std::move(trees));
    model.train_loss.push_back(mean_loss());
  }
  return model;
}

double mean_weighted_loss(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& owa) {
  if (weights.rows() != owa.rows() || weights.cols() != owa.cols()) {
    throw std::invalid_argument("weights and losses differ in shape");
  }
  if (weights.rows() == 0) return 0.0;
  return weights.cwiseProduct(owa).rowwise().sum().mean();
}

Eigen::VectorXd combine_forecasts(const Eigen::VectorXd& weights,
                                  const Eigen::MatrixXd& forecasts) {
  if (weights.size() != forecasts.rows()) {
    throw std::invalid_argument("one weight per method required");
  }
  return forecasts.transpose() * weights;
}

void save_weight_model(const WeightModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  io::write_header(out, kModelMagic, 1);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.methods));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.rounds.size()));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.features));
  io::write_pod<std::int32_t>(out, model.params.max_depth);
  io::write_pod<double>(out, model.params.learning_rate);
  io::write_pod<double>(out, model.params.subsample_rows);
  io::write_pod<double>(out, model.params.subsample_cols);
  io::write_pod<std::int32_t>(out, model.params.rounds);
  io::write_pod<std::uint64_t>(out, model.seed);
  for (const auto& round : model.rounds) {
    for (const auto& tree : round) write_tree(out, tree);
  }
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.train_loss.size()));
  for (double v : model.train_loss) io::write_pod<double>(out, v);
}

WeightModel load_weight_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  io::read_header(in, kModelMagic);
  WeightModel model;
  model.methods = static_cast<int>(io::read_pod<std::uint32_t>(in));
  const auto rounds = io::read_pod<std::uint32_t>(in);
  model.features = static_cast<int>(io::read_pod<std::uint32_t>(in));
  model.params.max_depth = io::read_pod<std::int32_t>(in);
  model.params.learning_rate = io::read_pod<double>(in);
  model.params.subsample_rows = io::read_pod<double>(in);
  model.params.subsample_cols = io::read_pod<double>(in);
  model.params.rounds = io::read_pod<std::int32_t>(in);
  model.seed = io::read_pod<std::uint64_t>(in);
  model.rounds.resize(rounds);
  for (auto& round : model.rounds) {
    round.reserve(static_cast<std::size_t>(model.methods));
    for (int m = 0; m < model.methods; ++m) round.push_back(read_tree(in));
  }
  const auto curve = io::read_pod<std::uint32_t>(in);
  model.train_loss.resize(curve);
  for (auto& v : model.train_loss) v = io::read_pod<double>(in);
  return model;
}

CvResult cv_search(const Eigen::MatrixXd& features, const Eigen::MatrixXd& owa,
                   const SearchSpace& space, int folds, int budget,
                   std::uint64_t seed, const HyperParams& defaults,
                   const BoostingOptions& options) {
  CvResult result;
  result.best = defaults;
  if (budget <= 0) return result;
  const int n = static_cast<int>(features.rows());
  folds = std::clamp(folds, 2, n);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> depth(space.depth_lo, space.depth_hi);
  std::uniform_real_distribution<double> log_rate(std::log(space.rate_lo), std::log(space.rate_hi));
  std::uniform_real_distribution<double> rows(space.rows_lo, space.rows_hi);
  std::uniform_real_distribution<double> cols(space.cols_lo, space.cols_hi);
  std::uniform_int_distribution<int> rounds(space.rounds_lo, space.rounds_hi);
  for (int b = 0; b < budget; ++b) {
    HyperParams hp;
    hp.max_depth = depth(rng);
    hp.learning_rate = std::clamp(std::exp(log_rate(rng)), space.rate_lo, space.rate_hi);
    hp.subsample_rows = rows(rng);
    hp.subsample_cols = cols(rng);
    hp.rounds = rounds(rng);
    result.configs.push_back(hp);
  }

  // Fold of each row from a seeded permutation.
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i % folds;

  auto take = [](const Eigen::MatrixXd& src, const std::vector<int>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), src.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(idx[i]);
    return out;
  };

  result.fold_loss.assign(result.configs.size(), std::vector<double>(static_cast<std::size_t>(folds)));
  for (int f = 0; f < folds; ++f) {
    std::vector<int> tr, va;
    for (int i = 0; i < n; ++i) (fold_of[static_cast<std::size_t>(i)] == f ? va : tr).push_back(i);
    const Eigen::MatrixXd xtr = take(features, tr), otr = take(owa, tr);
    const Eigen::MatrixXd xva = take(features, va), ova = take(owa, va);
    for (std::size_t c = 0; c < result.configs.size(); ++c) {
      const WeightModel model = train_weight_model(xtr, otr, result.configs[c], seed + static_cast<std::uint64_t>(f), options);
      result.fold_loss[c][static_cast<std::size_t>(f)] = mean_weighted_loss(model.predict_batch(xva), ova);
    }
  }
  for (const auto& fl : result.fold_loss) {
    result.mean_loss.push_back(std::accumulate(fl.begin(), fl.end(), 0.0) / folds);
  }
  result.selected = static_cast<int>(std::min_element(result.mean_loss.begin(), result.mean_loss.end()) -
                                     result.mean_loss.begin());
  result.best = result.configs[static_cast<std::size_t>(result.selected)];
  return result;
}

}  // namespace sbof
