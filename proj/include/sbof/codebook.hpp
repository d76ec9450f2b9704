#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sbof {

/// K basis descriptors stored as the columns of a dim x K matrix.
struct Codebook {
  Eigen::MatrixXd bases;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return bases.cols(); }
  Eigen::Index dim() const { return bases.rows(); }
};

struct KMeansParams {
  int clusters = 200;
  std::uint64_t seed = 0;
  int max_iters = 100;
  double tol = 1e-4;
};

struct KMeansReport {
  /// Inertia after each assignment step, starting with the seeding.
  std::vector<double> inertia;
  int iterations = 0;
  int reseeded = 0;
  bool reduced_k = false;  // fewer descriptors than requested clusters
};

/// Lloyd's algorithm with k-means++ seeding. `descriptors` holds one
/// sample per column.
Codebook train_codebook(const Eigen::MatrixXd& descriptors,
                        const KMeansParams& params = {},
                        KMeansReport* report = nullptr);

/// Index of the nearest basis for every column of `points`.
Eigen::VectorXi assign_nearest(const Eigen::MatrixXd& points,
                               const Eigen::MatrixXd& centers,
                               Eigen::VectorXd* squared_distances = nullptr);

/// The k nearest bases by Euclidean distance, ascending, ties to the lower
/// index.
std::vector<int> knn(const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Codebook& cb, int k = 5);

/// Seeded uniform subsample of at most `cap` columns, in original order.
Eigen::MatrixXd subsample_columns(const Eigen::MatrixXd& samples,
                                  Eigen::Index cap, std::uint64_t seed);

void save_codebook(const Codebook& cb, const std::string& path);
Codebook load_codebook(const std::string& path);

}  // namespace sbof
