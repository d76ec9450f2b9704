#include "sbof/sift.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "sbof/binary_io.hpp"

namespace sbof {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMaxInterpSteps = 5;
constexpr int kOrientationBins = 36;
constexpr double kOrientationSigmaFactor = 1.5;
constexpr double kOrientationRadiusFactor = 3.0 * kOrientationSigmaFactor;
constexpr int kDescriptorWidth = 4;  // 4x4 spatial cells
constexpr int kDescriptorBins = 8;
constexpr double kDescriptorCellFactor = 3.0;  // cell width in sigmas

constexpr io::Magic kDescriptorMagic = io::make_magic("SBOFDSC1");

// Mirror index into [0, n) without repeating the edge sample.
inline Eigen::Index mirror(Eigen::Index i, Eigen::Index n) {
  if (n == 1) return 0;
  const Eigen::Index period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Eigen::VectorXd gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(5.0 * sigma)));
  Eigen::VectorXd k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  }
  return k / k.sum();
}

ImageD downsample(const ImageD& img) {
  const Eigen::Index rows = (img.rows() + 1) / 2;
  const Eigen::Index cols = (img.cols() + 1) / 2;
  ImageD out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = img(2 * r, 2 * c);
  }
  return out;
}

struct Refined {
  double x, y, layer_offset, response;
  int row, col, layer;
};

// Quadratic fit of the DoG around (layer, row, col); rejects unstable,
// low-contrast and edge-like extrema.
bool refine_extremum(const std::vector<ImageD>& dog, int layer, int row,
                     int col, const SiftParams& p, Refined& out) {
  const int s = p.scales_per_octave;
  const Eigen::Index rows = dog[0].rows();
  const Eigen::Index cols = dog[0].cols();
  Eigen::Vector3d offset;
  Eigen::Vector3d grad;
  int step = 0;
  for (; step < kMaxInterpSteps; ++step) {
    const ImageD& cur = dog[layer];
    const ImageD& prev = dog[layer - 1];
    const ImageD& next = dog[layer + 1];
    grad << 0.5 * (cur(row, col + 1) - cur(row, col - 1)),
        0.5 * (cur(row + 1, col) - cur(row - 1, col)),
        0.5 * (next(row, col) - prev(row, col));
    const double v2 = 2.0 * cur(row, col);
    const double dxx = cur(row, col + 1) + cur(row, col - 1) - v2;
    const double dyy = cur(row + 1, col) + cur(row - 1, col) - v2;
    const double dss = next(row, col) + prev(row, col) - v2;
    const double dxy = 0.25 * (cur(row + 1, col + 1) - cur(row + 1, col - 1) -
                               cur(row - 1, col + 1) + cur(row - 1, col - 1));
    const double dxs = 0.25 * (next(row, col + 1) - next(row, col - 1) -
                               prev(row, col + 1) + prev(row, col - 1));
    const double dys = 0.25 * (next(row + 1, col) - next(row - 1, col) -
                               prev(row + 1, col) + prev(row - 1, col));
    Eigen::Matrix3d hess;
    hess << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
    offset = -hess.fullPivLu().solve(grad);
    if (!offset.allFinite()) return false;
    if ((offset.array().abs() < 0.5).all()) break;
    if ((offset.array().abs() > 1e6).any()) return false;
    col += static_cast<int>(std::lround(offset[0]));
    row += static_cast<int>(std::lround(offset[1]));
    layer += static_cast<int>(std::lround(offset[2]));
    if (layer < 1 || layer > s || col < p.border || col >= cols - p.border ||
        row < p.border || row >= rows - p.border) {
      return false;
    }
  }
  if (step >= kMaxInterpSteps) return false;

  const ImageD& cur = dog[layer];
  const double response = cur(row, col) + 0.5 * grad.dot(offset);
  if (std::abs(response) < p.contrast_threshold) return false;

  const double v2 = 2.0 * cur(row, col);
  const double dxx = cur(row, col + 1) + cur(row, col - 1) - v2;
  const double dyy = cur(row + 1, col) + cur(row - 1, col) - v2;
  const double dxy = 0.25 * (cur(row + 1, col + 1) - cur(row + 1, col - 1) -
                             cur(row - 1, col + 1) + cur(row - 1, col - 1));
  const double trace = dxx + dyy;
  const double det = dxx * dyy - dxy * dxy;
  const double r = p.edge_ratio;
  if (det <= 0.0 || trace * trace * r >= (r + 1.0) * (r + 1.0) * det) {
    return false;
  }

  out = Refined{col + offset[0], row + offset[1], offset[2], response,
                row, col, layer};
  return true;
}

bool is_extremum(const std::vector<ImageD>& dog, int layer, Eigen::Index r,
                 Eigen::Index c) {
  const double v = dog[layer](r, c);
  if (v > 0.0) {
    for (int l = layer - 1; l <= layer + 1; ++l) {
      for (Eigen::Index dr = -1; dr <= 1; ++dr) {
        for (Eigen::Index dc = -1; dc <= 1; ++dc) {
          if (dog[l](r + dr, c + dc) > v) return false;
        }
      }
    }
    return true;
  }
  if (v < 0.0) {
    for (int l = layer - 1; l <= layer + 1; ++l) {
      for (Eigen::Index dr = -1; dr <= 1; ++dr) {
        for (Eigen::Index dc = -1; dc <= 1; ++dc) {
          if (dog[l](r + dr, c + dc) < v) return false;
        }
      }
    }
    return true;
  }
  return false;
}

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

}  // namespace

double ScaleSpace::layer_sigma(double layer) const {
  return sigma * std::exp2(layer / scales_per_octave);
}

ImageD to_unit_image(const GrayImage& img) {
  return img.pixels.cast<double>() / 255.0;
}

int max_octaves(int width, int height) {
  const int side = std::min(width, height);
  if (side < 16) return 1;
  return std::max(1, static_cast<int>(std::floor(std::log2(side))) - 2);
}

ImageD gaussian_blur(const ImageD& img, double sigma) {
  if (sigma <= 0.0) return img;
  const Eigen::VectorXd k = gaussian_kernel(sigma);
  const Eigen::Index radius = (k.size() - 1) / 2;
  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();

  ImageD tmp(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (Eigen::Index t = -radius; t <= radius; ++t) {
        acc += k[t + radius] * img(r, mirror(c + t, cols));
      }
      tmp(r, c) = acc;
    }
  }
  ImageD out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (Eigen::Index t = -radius; t <= radius; ++t) {
        acc += k[t + radius] * tmp(mirror(r + t, rows), c);
      }
      out(r, c) = acc;
    }
  }
  return out;
}

ScaleSpace build_dog_pyramid(const ImageD& img, int octaves,
                             int scales_per_octave, const SiftParams& params) {
  if (img.rows() < 16 || img.cols() < 16) {
    throw std::invalid_argument("build_dog_pyramid: image smaller than 16x16");
  }
  if (scales_per_octave < 3) {
    throw std::invalid_argument("build_dog_pyramid: scales_per_octave < 3");
  }
  const int cap = max_octaves(static_cast<int>(img.cols()),
                              static_cast<int>(img.rows()));
  octaves = octaves <= 0 ? cap : std::min(octaves, cap);

  ScaleSpace ss;
  ss.scales_per_octave = scales_per_octave;
  ss.sigma = params.sigma;
  ss.base_width = static_cast<int>(img.cols());
  ss.base_height = static_cast<int>(img.rows());

  const int layers = scales_per_octave + 3;
  std::vector<double> increments(layers);
  increments[0] = std::sqrt(std::max(
      0.0, params.sigma * params.sigma - params.input_sigma * params.input_sigma));
  for (int i = 1; i < layers; ++i) {
    const double prev = ss.layer_sigma(i - 1);
    const double total = ss.layer_sigma(i);
    increments[i] = std::sqrt(total * total - prev * prev);
  }

  ss.gaussians.resize(octaves);
  ss.dogs.resize(octaves);
  for (int o = 0; o < octaves; ++o) {
    auto& g = ss.gaussians[o];
    g.reserve(layers);
    if (o == 0) {
      g.push_back(gaussian_blur(img, increments[0]));
    } else {
      g.push_back(downsample(ss.gaussians[o - 1][scales_per_octave]));
    }
    for (int i = 1; i < layers; ++i) {
      g.push_back(gaussian_blur(g.back(), increments[i]));
    }
    auto& d = ss.dogs[o];
    d.reserve(layers - 1);
    for (int i = 0; i + 1 < layers; ++i) d.push_back(g[i + 1] - g[i]);
  }
  return ss;
}

ScaleSpace build_dog_pyramid(const GrayImage& img, int octaves,
                             int scales_per_octave, const SiftParams& params) {
  return build_dog_pyramid(to_unit_image(img), octaves, scales_per_octave,
                           params);
}

std::vector<Keypoint> detect_keypoints(const ScaleSpace& pyramid,
                                       const SiftParams& params) {
  SiftParams p = params;
  p.scales_per_octave = pyramid.scales_per_octave;
  const double prelim = 0.5 * p.contrast_threshold;
  std::vector<Keypoint> out;
  for (int o = 0; o < pyramid.octaves(); ++o) {
    const auto& dog = pyramid.dogs[o];
    const Eigen::Index rows = dog[0].rows();
    const Eigen::Index cols = dog[0].cols();
    const double unit = std::exp2(o);
    for (int layer = 1; layer <= p.scales_per_octave; ++layer) {
      for (Eigen::Index r = p.border; r < rows - p.border; ++r) {
        for (Eigen::Index c = p.border; c < cols - p.border; ++c) {
          if (std::abs(dog[layer](r, c)) <= prelim) continue;
          if (!is_extremum(dog, layer, r, c)) continue;
          Refined ref{};
          if (!refine_extremum(dog, layer, static_cast<int>(r),
                               static_cast<int>(c), p, ref)) {
            continue;
          }
          Keypoint kp;
          kp.x = ref.x * unit;
          kp.y = ref.y * unit;
          if (kp.x < 0.0 || kp.y < 0.0 || kp.x >= pyramid.base_width ||
              kp.y >= pyramid.base_height) {
            continue;
          }
          kp.octave = o;
          kp.layer = ref.layer;
          kp.layer_offset = ref.layer_offset;
          kp.scale = pyramid.layer_sigma(ref.layer + ref.layer_offset) * unit;
          kp.response = ref.response;
          out.push_back(kp);
        }
      }
    }
  }
  return out;
}

std::vector<Keypoint> assign_orientations(const Keypoint& kp,
                                          const ScaleSpace& pyramid,
                                          const SiftParams& params) {
  const ImageD& img = pyramid.gaussians.at(kp.octave).at(kp.layer);
  const double unit = std::exp2(kp.octave);
  const double octave_sigma = pyramid.layer_sigma(kp.layer + kp.layer_offset);
  const double weight_sigma = kOrientationSigmaFactor * octave_sigma;
  const int radius =
      static_cast<int>(std::lround(kOrientationRadiusFactor * octave_sigma));
  const int cx = static_cast<int>(std::lround(kp.x / unit));
  const int cy = static_cast<int>(std::lround(kp.y / unit));
  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();

  std::array<double, kOrientationBins> hist{};
  int inside = 0;
  const double denom = 2.0 * weight_sigma * weight_sigma;
  for (int i = -radius; i <= radius; ++i) {
    const int y = cy + i;
    if (y <= 0 || y >= rows - 1) continue;
    for (int j = -radius; j <= radius; ++j) {
      const int x = cx + j;
      if (x <= 0 || x >= cols - 1) continue;
      ++inside;
      const double dx = img(y, x + 1) - img(y, x - 1);
      const double dy = img(y + 1, x) - img(y - 1, x);
      const double w = std::exp(-(i * i + j * j) / denom);
      const double angle = wrap_angle(std::atan2(dy, dx));
      int bin = static_cast<int>(std::lround(angle * kOrientationBins / kTwoPi));
      if (bin >= kOrientationBins) bin -= kOrientationBins;
      hist[bin] += w * std::hypot(dx, dy);
    }
  }
  const int window = (2 * radius + 1) * (2 * radius + 1);
  if (2 * inside < window) return {};

  std::array<double, kOrientationBins> smooth{};
  for (int b = 0; b < kOrientationBins; ++b) {
    auto at = [&](int k) {
      return hist[(b + k + kOrientationBins) % kOrientationBins];
    };
    smooth[b] = (at(-2) + at(2)) / 16.0 + (at(-1) + at(1)) * 4.0 / 16.0 +
                at(0) * 6.0 / 16.0;
  }
  const double peak = *std::max_element(smooth.begin(), smooth.end());
  if (peak <= 0.0) {
    Keypoint out = kp;
    out.orientation = 0.0;
    return {out};
  }

  std::vector<Keypoint> out;
  for (int b = 0; b < kOrientationBins; ++b) {
    const double left = smooth[(b + kOrientationBins - 1) % kOrientationBins];
    const double right = smooth[(b + 1) % kOrientationBins];
    const double v = smooth[b];
    if (v > left && v > right && v >= params.peak_ratio * peak) {
      const double shift = 0.5 * (left - right) / (left - 2.0 * v + right);
      Keypoint oriented = kp;
      oriented.orientation = wrap_angle((b + shift) * kTwoPi / kOrientationBins);
      out.push_back(oriented);
    }
  }
  return out;
}

bool normalize_descriptor(DescriptorValues& v, double clip) {
  const double norm = v.norm();
  if (!(norm > 1e-10)) {
    v.setZero();
    return false;
  }
  v /= norm;
  v = v.cwiseMin(clip);
  const double clipped = v.norm();
  v /= clipped;
  return true;
}

Descriptor compute_descriptor(const Keypoint& kp, const ScaleSpace& pyramid,
                              const SiftParams& params) {
  constexpr int d = kDescriptorWidth;
  constexpr int n = kDescriptorBins;
  const ImageD& img = pyramid.gaussians.at(kp.octave).at(kp.layer);
  const double unit = std::exp2(kp.octave);
  const double octave_sigma = pyramid.layer_sigma(kp.layer + kp.layer_offset);
  const double cell = kDescriptorCellFactor * octave_sigma;
  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();
  int radius = static_cast<int>(
      std::lround(cell * std::numbers::sqrt2 * (d + 1) * 0.5));
  radius = std::min<int>(radius, static_cast<int>(std::hypot(rows, cols)));

  const double cos_t = std::cos(kp.orientation) / cell;
  const double sin_t = std::sin(kp.orientation) / cell;
  const double bins_per_rad = n / kTwoPi;
  const double exp_scale = -1.0 / (d * d * 0.5);
  const int cx = static_cast<int>(std::lround(kp.x / unit));
  const int cy = static_cast<int>(std::lround(kp.y / unit));

  // (d+2)^2 spatial cells x (n+2) orientation bins, with a one-cell guard
  // band for the trilinear spill.
  std::vector<double> hist((d + 2) * (d + 2) * (n + 2), 0.0);
  auto idx = [&](int r, int c, int o) { return ((r * (d + 2)) + c) * (n + 2) + o; };

  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      const double c_rot = j * cos_t + i * sin_t;
      const double r_rot = -j * sin_t + i * cos_t;
      const double rbin = r_rot + d / 2.0 - 0.5;
      const double cbin = c_rot + d / 2.0 - 0.5;
      const int y = cy + i;
      const int x = cx + j;
      if (!(rbin > -1.0 && rbin < d && cbin > -1.0 && cbin < d)) continue;
      if (y <= 0 || y >= rows - 1 || x <= 0 || x >= cols - 1) continue;
      const double dx = img(y, x + 1) - img(y, x - 1);
      const double dy = img(y + 1, x) - img(y - 1, x);
      const double mag = std::hypot(dx, dy) *
                         std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);
      if (mag == 0.0) continue;
      double obin =
          wrap_angle(std::atan2(dy, dx) - kp.orientation) * bins_per_rad;

      const int r0 = static_cast<int>(std::floor(rbin));
      const int c0 = static_cast<int>(std::floor(cbin));
      int o0 = static_cast<int>(std::floor(obin));
      const double fr = rbin - r0;
      const double fc = cbin - c0;
      const double fo = obin - o0;
      if (o0 < 0) o0 += n;
      if (o0 >= n) o0 -= n;

      const double v_r1 = mag * fr, v_r0 = mag - v_r1;
      const double v_rc11 = v_r1 * fc, v_rc10 = v_r1 - v_rc11;
      const double v_rc01 = v_r0 * fc, v_rc00 = v_r0 - v_rc01;
      const double v_rco111 = v_rc11 * fo, v_rco110 = v_rc11 - v_rco111;
      const double v_rco101 = v_rc10 * fo, v_rco100 = v_rc10 - v_rco101;
      const double v_rco011 = v_rc01 * fo, v_rco010 = v_rc01 - v_rco011;
      const double v_rco001 = v_rc00 * fo, v_rco000 = v_rc00 - v_rco001;

      hist[idx(r0 + 1, c0 + 1, o0)] += v_rco000;
      hist[idx(r0 + 1, c0 + 1, o0 + 1)] += v_rco001;
      hist[idx(r0 + 1, c0 + 2, o0)] += v_rco010;
      hist[idx(r0 + 1, c0 + 2, o0 + 1)] += v_rco011;
      hist[idx(r0 + 2, c0 + 1, o0)] += v_rco100;
      hist[idx(r0 + 2, c0 + 1, o0 + 1)] += v_rco101;
      hist[idx(r0 + 2, c0 + 2, o0)] += v_rco110;
      hist[idx(r0 + 2, c0 + 2, o0 + 1)] += v_rco111;
    }
  }

  Descriptor desc;
  desc.keypoint = kp;
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) {
      // Orientation wraps: bin n spills into bin 0.
      hist[idx(r + 1, c + 1, 0)] += hist[idx(r + 1, c + 1, n)];
      for (int o = 0; o < n; ++o) {
        desc.values[(r * d + c) * n + o] = hist[idx(r + 1, c + 1, o)];
      }
    }
  }
  desc.flat = !normalize_descriptor(desc.values, params.descriptor_clip);
  return desc;
}

std::vector<Descriptor> extract_sift(const GrayImage& img,
                                     const SiftParams& params) {
  const ScaleSpace ss = build_dog_pyramid(img, params.octaves,
                                          params.scales_per_octave, params);
  std::vector<Descriptor> out;
  for (const auto& kp : detect_keypoints(ss, params)) {
    for (const auto& oriented : assign_orientations(kp, ss, params)) {
      Descriptor desc = compute_descriptor(oriented, ss, params);
      if (!desc.flat) out.push_back(std::move(desc));
    }
  }
  return out;
}

void write_keypoints_csv(const std::vector<Descriptor>& descriptors,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "x,y,scale,orientation\n";
  for (const auto& d : descriptors) {
    const auto& k = d.keypoint;
    out << k.x << ',' << k.y << ',' << k.scale << ',' << k.orientation << '\n';
  }
}

void write_descriptors_bin(const std::vector<Descriptor>& descriptors,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  io::write_header(out, kDescriptorMagic, 1);
  io::write_pod<std::uint64_t>(out, descriptors.size());
  io::write_pod<std::uint32_t>(out, kDescriptorSize);
  for (const auto& d : descriptors) {
    for (int i = 0; i < kDescriptorSize; ++i) {
      io::write_pod<float>(out, static_cast<float>(d.values[i]));
    }
  }
}

std::vector<DescriptorValues> read_descriptors_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  io::read_header(in, kDescriptorMagic);
  const auto count = io::read_pod<std::uint64_t>(in);
  const auto dim = io::read_pod<std::uint32_t>(in);
  if (dim != kDescriptorSize) throw std::runtime_error("descriptor dim mismatch");
  std::vector<DescriptorValues> out(count);
  for (auto& v : out) {
    for (int i = 0; i < kDescriptorSize; ++i) v[i] = io::read_pod<float>(in);
  }
  return out;
}

}  // namespace sbof
