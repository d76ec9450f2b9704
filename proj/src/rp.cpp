#include "sbof/rp.hpp"

#include <fstream>
#include <stdexcept>
#include <vector>

namespace sbof {

namespace {

// Overlap of each destination bin [d*n/size, (d+1)*n/size) with source
// cells, as a size x n weight matrix whose rows sum to 1.
Eigen::MatrixXd area_weights(Eigen::Index n, Eigen::Index size) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(size, n);
  // Work in units of 1/size of a source cell so the bin edges are integers.
  for (Eigen::Index d = 0; d < size; ++d) {
    const Eigen::Index lo = d * n;
    const Eigen::Index hi = (d + 1) * n;
    for (Eigen::Index c = lo / size; c < n && c * size < hi; ++c) {
      const Eigen::Index cell_lo = c * size;
      const Eigen::Index cell_hi = (c + 1) * size;
      const Eigen::Index overlap =
          std::min(hi, cell_hi) - std::max(lo, cell_lo);
      if (overlap > 0) w(d, c) = static_cast<double>(overlap) / n;
    }
  }
  return w;
}

}  // namespace

RecurrenceMatrix encode_series(const Eigen::VectorXd& values,
                               const RpParams& params) {
  return recurrence_matrix(normalize(values), params.eps, params.steps);
}

Eigen::MatrixXd cell_intensities(const RecurrenceMatrix& rm) {
  return (rm.cells.cast<double>() * (255.0 / rm.steps)).array().round();
}

Eigen::MatrixXd resample_area(const Eigen::MatrixXd& src, int size) {
  const Eigen::MatrixXd wr = area_weights(src.rows(), size);
  const Eigen::MatrixXd wc = area_weights(src.cols(), size);
  return wr * src * wc.transpose();
}

GrayImage render(const RecurrenceMatrix& rm, int size) {
  if (rm.size() < 2) throw std::invalid_argument("render: matrix smaller than 2x2");
  if (size < 16) throw std::invalid_argument("render: size must be >= 16");
  const Eigen::MatrixXd resampled = resample_area(cell_intensities(rm), size);
  GrayImage img;
  img.pixels = resampled.array().round().max(0.0).min(255.0).cast<std::uint8_t>();
  return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) {
    throw std::runtime_error(path + ": unsupported PGM");
  }
  in.get();
  GrayImage img;
  img.pixels.resize(h, w);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw std::runtime_error(path + ": truncated PGM");
  return img;
}

}  // namespace sbof
