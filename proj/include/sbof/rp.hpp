#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace sbof {

using GrayPixels =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GrayImage {
  GrayPixels pixels;  // rows = height, cols = width

  Eigen::Index width() const { return pixels.cols(); }
  Eigen::Index height() const { return pixels.rows(); }
};

/// Quantized, eps-clipped distance matrix of a scalar series.
struct RecurrenceMatrix {
  double eps = 0.1;
  int steps = 5;
  Eigen::MatrixXi cells;  // values in [0, steps]

  Eigen::Index size() const { return cells.rows(); }
};

struct RpParams {
  double eps = 0.1;
  int steps = 5;
  int render_size = 128;
};

/// Min-max scaling to [0, 1]; a constant input maps to zeros.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> normalize(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Scalar lo = x.minCoeff();
  const Scalar range = x.maxCoeff() - lo;
  if (!(range > Scalar(0))) return Vec::Zero(x.size());
  return ((x.array() - lo) / range).matrix();
}

/// Level of one clipped distance: 0 iff r == 0, else ceil(r * steps / eps).
template <typename Scalar>
int quantize_distance(Scalar distance, Scalar eps, int steps) {
  const Scalar r = std::min(distance, eps);
  if (!(r > Scalar(0))) return 0;
  const Scalar scaled = r * static_cast<Scalar>(steps) / eps;
  // Absorb rounding in r*steps/eps so exact multiples of eps/steps stay put.
  const Scalar slack = Scalar(64) * std::numeric_limits<Scalar>::epsilon() *
                       static_cast<Scalar>(steps);
  const int level = static_cast<int>(std::ceil(scaled - slack));
  return std::clamp(level, 1, steps);
}

/// Modified recurrence matrix with embedding dimension 1 and delay 1.
template <typename Derived>
RecurrenceMatrix recurrence_matrix(const Eigen::MatrixBase<Derived>& x,
                                   double eps = 0.1, int steps = 5) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.size();
  RecurrenceMatrix rm;
  rm.eps = eps;
  rm.steps = steps;
  rm.cells = Eigen::MatrixXi::Zero(n, n);
  const Scalar e = static_cast<Scalar>(eps);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const int level = quantize_distance<Scalar>(std::abs(x(i) - x(j)), e, steps);
      rm.cells(i, j) = level;
      rm.cells(j, i) = level;
    }
  }
  return rm;
}

/// Normalizes then builds the recurrence matrix.
RecurrenceMatrix encode_series(const Eigen::VectorXd& values,
                               const RpParams& params = {});

/// Intensity per cell, round(255 * cell / steps), before resampling.
Eigen::MatrixXd cell_intensities(const RecurrenceMatrix& rm);

/// Renders to a size x size image by area (box-filter) resampling of the
/// per-cell intensities. n == size reproduces the intensities exactly.
GrayImage render(const RecurrenceMatrix& rm, int size = 128);

/// Area resampling of a real-valued image to size x size.
Eigen::MatrixXd resample_area(const Eigen::MatrixXd& src, int size);

/// Binary PGM (P5).
void write_pgm(const GrayImage& img, const std::string& path);
GrayImage read_pgm(const std::string& path);

}  // namespace sbof
