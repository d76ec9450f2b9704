#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sbof/rp.hpp"

namespace sbof {

/// Real-valued image, rows = y, cols = x, intensities nominally in [0, 1].
using ImageD =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kDescriptorSize = 128;
using DescriptorValues = Eigen::Matrix<double, kDescriptorSize, 1>;

/// Lowe's 2004 settings, with no initial 2x upsampling.
struct SiftParams {
  int scales_per_octave = 3;
  int octaves = 0;  // 0 selects floor(log2(min side)) - 2
  double sigma = 1.6;
  double input_sigma = 0.5;
  double contrast_threshold = 0.03;
  double edge_ratio = 10.0;
  double peak_ratio = 0.8;
  double descriptor_clip = 0.2;
  int border = 5;
};

struct ScaleSpace {
  int scales_per_octave = 3;
  double sigma = 1.6;
  int base_width = 0;
  int base_height = 0;
  std::vector<std::vector<ImageD>> gaussians;  // [octave][scales + 3]
  std::vector<std::vector<ImageD>> dogs;       // [octave][scales + 2]

  int octaves() const { return static_cast<int>(dogs.size()); }
  /// Blur level of Gaussian layer `layer`, in units of its own octave.
  double layer_sigma(double layer) const;
};

struct Keypoint {
  double x = 0.0;  // base-image units
  double y = 0.0;
  double scale = 0.0;  // sigma in base-image units
  double orientation = 0.0;  // radians in [0, 2pi), image axes (y down)
  int octave = 0;
  int layer = 0;
  double layer_offset = 0.0;  // sub-layer refinement in [-0.5, 0.5]
  double response = 0.0;      // interpolated DoG value
};

struct Descriptor {
  DescriptorValues values = DescriptorValues::Zero();
  Keypoint keypoint;
  bool flat = false;  // zero gradient energy; values are all zero
};

ImageD to_unit_image(const GrayImage& img);

int max_octaves(int width, int height);

/// Separable Gaussian blur with mirrored borders.
ImageD gaussian_blur(const ImageD& img, double sigma);

ScaleSpace build_dog_pyramid(const ImageD& img, int octaves,
                             int scales_per_octave,
                             const SiftParams& params = {});
ScaleSpace build_dog_pyramid(const GrayImage& img, int octaves,
                             int scales_per_octave,
                             const SiftParams& params = {});

std::vector<Keypoint> detect_keypoints(const ScaleSpace& pyramid,
                                       const SiftParams& params = {});

/// One keypoint per histogram peak within peak_ratio of the maximum.
/// Empty when less than half of the sampling window lies in the image.
std::vector<Keypoint> assign_orientations(const Keypoint& kp,
                                          const ScaleSpace& pyramid,
                                          const SiftParams& params = {});

/// Unit-normalize, clip at `clip`, renormalize. Returns false (and zeroes
/// the vector) when the input has no energy.
bool normalize_descriptor(DescriptorValues& v, double clip = 0.2);

Descriptor compute_descriptor(const Keypoint& kp, const ScaleSpace& pyramid,
                              const SiftParams& params = {});

/// Full extraction: pyramid, detection, orientation, description. Flat
/// descriptors are dropped.
std::vector<Descriptor> extract_sift(const GrayImage& img,
                                     const SiftParams& params = {});

/// Debug dumps: `x,y,scale,orientation` CSV and a float32 block with a
/// magic/version/count header.
void write_keypoints_csv(const std::vector<Descriptor>& descriptors,
                         const std::string& path);
void write_descriptors_bin(const std::vector<Descriptor>& descriptors,
                           const std::string& path);
std::vector<DescriptorValues> read_descriptors_bin(const std::string& path);

}  // namespace sbof
