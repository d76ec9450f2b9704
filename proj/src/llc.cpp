#include "sbof/llc.hpp"

#include <stdexcept>

#include "sbof/parallel.hpp"

namespace sbof {

Eigen::VectorXd llc_solve(const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::MatrixXd& local_bases, double lambda,
                          bool* fallback) {
  const Eigen::Index k = local_bases.cols();
  const Eigen::MatrixXd z = local_bases.colwise() - x;
  Eigen::MatrixXd gram = z.transpose() * z;
  const double trace = gram.trace();
  gram.diagonal().array() += lambda * trace;
  Eigen::VectorXd c = gram.ldlt().solve(Eigen::VectorXd::Ones(k));
  const double total = c.sum();
  const bool degenerate =
      !(trace > 0.0) || !c.allFinite() || !std::isfinite(total) ||
      std::abs(total) < 1e-300;
  if (fallback) *fallback = degenerate;
  if (degenerate) return Eigen::VectorXd::Constant(k, 1.0 / k);
  c /= total;
  return c;
}

double llc_objective(const Eigen::Ref<const Eigen::VectorXd>& x,
                     const Eigen::MatrixXd& local_bases,
                     const Eigen::VectorXd& c, double lambda) {
  const Eigen::MatrixXd z = local_bases.colwise() - x;
  const double trace = (z.transpose() * z).trace();
  return (x - local_bases * c).squaredNorm() + lambda * trace * c.squaredNorm();
}

LlcCode llc_code(const Eigen::Ref<const Eigen::VectorXd>& x, const Codebook& cb,
                 int k, double lambda) {
  if (k > cb.size()) throw std::invalid_argument("llc_code: k exceeds codebook size");
  LlcCode code;
  code.indices = knn(x, cb, k);
  code.lambda = lambda;
  Eigen::MatrixXd local(cb.dim(), k);
  for (int j = 0; j < k; ++j) local.col(j) = cb.bases.col(code.indices[j]);
  code.coefficients = llc_solve(x, local, lambda, &code.fallback);
  return code;
}

std::vector<LlcCode> llc_code_all(const Eigen::MatrixXd& descriptors,
                                  const Codebook& cb, int k, double lambda,
                                  int threads) {
  std::vector<LlcCode> out(static_cast<std::size_t>(descriptors.cols()));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = llc_code(descriptors.col(static_cast<Eigen::Index>(i)), cb, k, lambda);
  });
  return out;
}

}  // namespace sbof
