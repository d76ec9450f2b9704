#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbof/llc.hpp"
#include "sbof/sift.hpp"

namespace sbof {

/// 1x1, 2x2 and 4x4 grids.
inline constexpr int kPyramidRegions = 21;

struct FeatureVector {
  std::string series_id;
  Eigen::VectorXf values;
};

enum class PoolingMode { Signed, Absolute };

/// Global region index per level: 0, then 1..4, then 5..20.
std::array<int, 3> region_ids(double x, double y, int image_size);

/// Max pooling of dense codes over the 21 pyramid regions. Codes are
/// scattered to K-vectors; empty regions stay zero.
Eigen::VectorXd pool_codes(const std::vector<LlcCode>& codes,
                           const std::vector<Keypoint>& keypoints, int k_bases,
                           int image_size,
                           PoolingMode mode = PoolingMode::Signed);

FeatureVector pool(const std::string& series_id,
                   const std::vector<LlcCode>& codes,
                   const std::vector<Keypoint>& keypoints, int k_bases,
                   int image_size, PoolingMode mode = PoolingMode::Signed);

/// Feature file: header with magic, version, K and region count, then one
/// record per series (id, K * regions float32 values). External feature
/// sets use regions = 1 and K = their dimension.
struct FeatureFile {
  std::uint32_t k_bases = 0;
  std::uint32_t regions = kPyramidRegions;
  std::vector<FeatureVector> records;

  std::size_t dim() const { return static_cast<std::size_t>(k_bases) * regions; }
};

void write_feature_file(const FeatureFile& file, const std::string& path);
FeatureFile read_feature_file(const std::string& path);

/// Stacks records into an N x D matrix (row per series).
Eigen::MatrixXd feature_matrix(const FeatureFile& file);

}  // namespace sbof
