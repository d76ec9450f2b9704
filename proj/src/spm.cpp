#include "sbof/spm.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "sbof/binary_io.hpp"

namespace sbof {

namespace {

constexpr io::Magic kFeatureMagic = io::make_magic("SBOFFEAT");

int grid_cell(double v, int image_size, int cells) {
  const int c = static_cast<int>(std::floor(v * cells / image_size));
  return std::clamp(c, 0, cells - 1);
}

}  // namespace

std::array<int, 3> region_ids(double x, double y, int image_size) {
  const int c1 = grid_cell(x, image_size, 2);
  const int r1 = grid_cell(y, image_size, 2);
  const int c2 = grid_cell(x, image_size, 4);
  const int r2 = grid_cell(y, image_size, 4);
  return {0, 1 + r1 * 2 + c1, 5 + r2 * 4 + c2};
}

Eigen::VectorXd pool_codes(const std::vector<LlcCode>& codes,
                           const std::vector<Keypoint>& keypoints, int k_bases,
                           int image_size, PoolingMode mode) {
  if (codes.size() != keypoints.size()) {
    throw std::invalid_argument("pool: codes and keypoints differ in length");
  }
  Eigen::MatrixXd regions = Eigen::MatrixXd::Zero(k_bases, kPyramidRegions);
  std::array<bool, kPyramidRegions> seen{};
  Eigen::VectorXd dense(k_bases);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    dense.setZero();
    const auto& code = codes[i];
    for (std::size_t j = 0; j < code.indices.size(); ++j) {
      const double c = code.coefficients[static_cast<Eigen::Index>(j)];
      dense[code.indices[j]] = mode == PoolingMode::Absolute ? std::abs(c) : c;
    }
    for (int r : region_ids(keypoints[i].x, keypoints[i].y, image_size)) {
      if (seen[r]) {
        regions.col(r) = regions.col(r).cwiseMax(dense);
      } else {
        regions.col(r) = dense;
        seen[r] = true;
      }
    }
  }
  return Eigen::Map<const Eigen::VectorXd>(regions.data(), regions.size());
}

FeatureVector pool(const std::string& series_id,
                   const std::vector<LlcCode>& codes,
                   const std::vector<Keypoint>& keypoints, int k_bases,
                   int image_size, PoolingMode mode) {
  return FeatureVector{
      series_id,
      pool_codes(codes, keypoints, k_bases, image_size, mode).cast<float>()};
}

void write_feature_file(const FeatureFile& file, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  io::write_header(out, kFeatureMagic, 1);
  io::write_pod(out, file.k_bases);
  io::write_pod(out, file.regions);
  io::write_pod<std::uint64_t>(out, file.records.size());
  for (const auto& rec : file.records) {
    if (static_cast<std::size_t>(rec.values.size()) != file.dim()) {
      throw std::invalid_argument(rec.series_id + ": feature length mismatch");
    }
    io::write_string(out, rec.series_id);
    out.write(reinterpret_cast<const char*>(rec.values.data()),
              static_cast<std::streamsize>(rec.values.size() * sizeof(float)));
  }
}

FeatureFile read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  io::read_header(in, kFeatureMagic);
  FeatureFile file;
  file.k_bases = io::read_pod<std::uint32_t>(in);
  file.regions = io::read_pod<std::uint32_t>(in);
  const auto count = io::read_pod<std::uint64_t>(in);
  file.records.resize(count);
  for (auto& rec : file.records) {
    rec.series_id = io::read_string(in);
    rec.values.resize(static_cast<Eigen::Index>(file.dim()));
    in.read(reinterpret_cast<char*>(rec.values.data()),
            static_cast<std::streamsize>(file.dim() * sizeof(float)));
    if (!in) throw std::runtime_error(path + ": truncated feature record");
  }
  return file;
}

Eigen::MatrixXd feature_matrix(const FeatureFile& file) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(file.records.size()),
                    static_cast<Eigen::Index>(file.dim()));
  for (std::size_t i = 0; i < file.records.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) =
        file.records[i].values.cast<double>().transpose();
  }
  return x;
}

}  // namespace sbof
