#include "sbof/codebook.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "sbof/binary_io.hpp"

namespace sbof {

namespace {

constexpr io::Magic kCodebookMagic = io::make_magic("SBOFCBK1");
constexpr Eigen::Index kAssignBlock = 4096;

std::vector<Eigen::Index> kmeanspp_seed(const Eigen::MatrixXd& x, int k,
                                        std::mt19937_64& rng) {
  const Eigen::Index n = x.cols();
  std::vector<Eigen::Index> chosen;
  chosen.reserve(k);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  chosen.push_back(first(rng));
  Eigen::VectorXd d2 = (x.colwise() - x.col(chosen[0])).colwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(chosen.size()) < k) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total <= 0.0) {
      // All remaining mass sits on chosen points: take the first unused index.
      std::vector<bool> used(n, false);
      for (auto c : chosen) used[c] = true;
      while (pick < n && used[pick]) ++pick;
      if (pick == n) pick = 0;
    } else {
      double target = unit(rng) * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2[pick];
        if (target < 0.0) break;
      }
    }
    chosen.push_back(pick);
    d2 = d2.cwiseMin((x.colwise() - x.col(pick)).colwise().squaredNorm().transpose());
  }
  return chosen;
}

}  // namespace

Eigen::VectorXi assign_nearest(const Eigen::MatrixXd& points,
                               const Eigen::MatrixXd& centers,
                               Eigen::VectorXd* squared_distances) {
  const Eigen::Index n = points.cols();
  const Eigen::Index k = centers.cols();
  Eigen::VectorXi labels(n);
  if (squared_distances) squared_distances->resize(n);
  const Eigen::RowVectorXd center_norms = centers.colwise().squaredNorm();
  for (Eigen::Index start = 0; start < n; start += kAssignBlock) {
    const Eigen::Index len = std::min(kAssignBlock, n - start);
    const auto block = points.middleCols(start, len);
    // ||c||^2 - 2 c.x ranks centers; exact distances are recomputed below.
    Eigen::MatrixXd scores = -2.0 * (block.transpose() * centers);
    scores.rowwise() += center_norms;
    for (Eigen::Index i = 0; i < len; ++i) {
      Eigen::Index best = 0;
      scores.row(i).minCoeff(&best);
      labels[start + i] = static_cast<int>(best);
      if (squared_distances) {
        (*squared_distances)[start + i] =
            (block.col(i) - centers.col(best)).squaredNorm();
      }
    }
  }
  (void)k;
  return labels;
}

Codebook train_codebook(const Eigen::MatrixXd& descriptors,
                        const KMeansParams& params, KMeansReport* report) {
  const Eigen::Index n = descriptors.cols();
  if (n == 0) throw std::invalid_argument("train_codebook: no descriptors");
  KMeansReport local;
  KMeansReport& rep = report ? *report : local;
  rep = KMeansReport{};

  int k = params.clusters;
  if (k < 1) throw std::invalid_argument("train_codebook: clusters < 1");
  if (n < k) {
    std::cerr << "warning: " << n << " descriptors < " << k
              << " clusters; reducing K\n";
    k = static_cast<int>(n);
    rep.reduced_k = true;
  }

  std::mt19937_64 rng(params.seed);
  const auto seeds = kmeanspp_seed(descriptors, k, rng);
  Eigen::MatrixXd centers(descriptors.rows(), k);
  for (int j = 0; j < k; ++j) centers.col(j) = descriptors.col(seeds[j]);

  Eigen::VectorXd d2;
  Eigen::VectorXi labels = assign_nearest(descriptors, centers, &d2);
  rep.inertia.push_back(d2.sum());

  for (int iter = 0; iter < params.max_iters; ++iter) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(descriptors.rows(), k);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(labels[i]) += descriptors.col(i);
      counts[labels[i]] += 1;
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) centers.col(j) = sums.col(j) / counts[j];
    }
    // Empty clusters take the point farthest from its current center.
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) continue;
      Eigen::Index far = 0;
      d2.maxCoeff(&far);
      centers.col(j) = descriptors.col(far);
      d2[far] = 0.0;
      ++rep.reseeded;
    }

    labels = assign_nearest(descriptors, centers, &d2);
    const double prev = rep.inertia.back();
    const double cur = d2.sum();
    rep.inertia.push_back(cur);
    rep.iterations = iter + 1;
    if (prev <= 0.0 || (prev - cur) / prev < params.tol) break;
  }

  // Final update so every center is the mean of its members.
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(descriptors.rows(), k);
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    sums.col(labels[i]) += descriptors.col(i);
    counts[labels[i]] += 1;
  }
  for (int j = 0; j < k; ++j) {
    if (counts[j] > 0) centers.col(j) = sums.col(j) / counts[j];
  }
  return Codebook{std::move(centers), params.seed};
}

std::vector<int> knn(const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Codebook& cb, int k) {
  const Eigen::Index total = cb.size();
  if (k > total) throw std::invalid_argument("knn: k exceeds codebook size");
  const Eigen::VectorXd d2 = (cb.bases.colwise() - x).colwise().squaredNorm();
  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](int a, int b) {
                      return d2[a] < d2[b] || (d2[a] == d2[b] && a < b);
                    });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

Eigen::MatrixXd subsample_columns(const Eigen::MatrixXd& samples,
                                  Eigen::Index cap, std::uint64_t seed) {
  const Eigen::Index n = samples.cols();
  if (n <= cap) return samples;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates; std::shuffle's algorithm is implementation-defined.
  for (Eigen::Index i = 0; i < cap; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(cap));
  std::sort(idx.begin(), idx.end());
  Eigen::MatrixXd out(samples.rows(), cap);
  for (Eigen::Index j = 0; j < cap; ++j) out.col(j) = samples.col(idx[j]);
  return out;
}

void save_codebook(const Codebook& cb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  io::write_header(out, kCodebookMagic, 1);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cb.size()));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cb.dim()));
  // Row-major K x dim: one basis per row.
  for (Eigen::Index j = 0; j < cb.size(); ++j) {
    for (Eigen::Index i = 0; i < cb.dim(); ++i) {
      io::write_pod<double>(out, cb.bases(i, j));
    }
  }
  io::write_pod<std::uint64_t>(out, cb.seed);
}

Codebook load_codebook(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  io::read_header(in, kCodebookMagic);
  const auto k = io::read_pod<std::uint32_t>(in);
  const auto dim = io::read_pod<std::uint32_t>(in);
  Codebook cb;
  cb.bases.resize(dim, k);
  for (std::uint32_t j = 0; j < k; ++j) {
    for (std::uint32_t i = 0; i < dim; ++i) {
      cb.bases(i, j) = io::read_pod<double>(in);
    }
  }
  cb.seed = io::read_pod<std::uint64_t>(in);
  if (!cb.bases.allFinite()) throw std::runtime_error(path + ": NaN basis");
  return cb;
}

}  // namespace sbof
