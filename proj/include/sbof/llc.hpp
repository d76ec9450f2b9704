#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "sbof/codebook.hpp"

namespace sbof {

/// Default ridge factor, e^-4.
inline const double kDefaultLlcLambda = std::exp(-4.0);

struct LlcCode {
  std::vector<int> indices;       // nearest bases, ascending distance
  Eigen::VectorXd coefficients;   // sums to one
  double lambda = kDefaultLlcLambda;
  bool fallback = false;          // uniform weights after a degenerate solve
};

/// Approximated locality-constrained linear coding of one descriptor over
/// its k nearest bases: solve (C + lambda tr(C) I) c = 1 with
/// C = (B_k - x)^T (B_k - x), then rescale c to sum to one.
LlcCode llc_code(const Eigen::Ref<const Eigen::VectorXd>& x, const Codebook& cb,
                 int k = 5, double lambda = kDefaultLlcLambda);

/// Codes over an explicit set of bases (columns), bypassing the KNN step.
Eigen::VectorXd llc_solve(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::MatrixXd& local_bases, double lambda,
                          bool* fallback = nullptr);

/// Value of ||x - B c||^2 + lambda tr(C) ||c||^2 for a given code.
double llc_objective(const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::MatrixXd& local_bases,
                     const Eigen::VectorXd& c, double lambda);

/// Codes every column of `descriptors`, preserving order.
std::vector<LlcCode> llc_code_all(const Eigen::MatrixXd& descriptors,
                                  const Codebook& cb, int k = 5,
                                  double lambda = kDefaultLlcLambda,
                                  int threads = 1);

}  // namespace sbof
