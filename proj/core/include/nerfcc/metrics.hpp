// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/image.hpp"

#include <array>
#include <string>
#include <vector>

namespace nerfcc {

/// Per-channel color histogram over the masked pixels of one image.
struct ColorHistogram {
  int n_bins = 256;
  std::array<std::vector<double>, 3> bins;  // normalized: each channel sums to 1
  size_t pixel_count = 0;
};

/// Channel value v in [0,1] lands in bin min(floor(v*n_bins), n_bins-1);
/// only in-mask pixels count. Empty mask is an error (undefined histogram).
ColorHistogram color_histogram(const ImageBuffer& image, const Mask& mask, int n_bins);

/// L1 distance between normalized histograms, averaged over the 3 channels.
double delta_h(const ColorHistogram& a, const ColorHistogram& b);

/// One shared mask per unordered image pair; the same pixel coordinates are
/// read from both images.
struct OverlapMask {
  int i = 0;
  int j = 0;
  Mask mask;
};

struct PairContribution {
  int i = 0;
  int j = 0;
  double weight = 0.0;
  double delta_h = 0.0;
  double contribution = 0.0;  // weight * delta_h / n_bins
};

/// CD = sum over pairs of w_ij * deltaH_ij / n_bins with w_ij proportional
/// to mask area (normalized over the included pairs).
double compute_cd(const std::vector<ImageBuffer>& images, const std::vector<OverlapMask>& overlaps,
                  int n_bins, std::vector<PairContribution>* contributions = nullptr);

/// Gradient direction of the grayscale mean (r+g+b)/3: central differences
/// ((f(x+1)-f(x-1))/2) with replicate borders; a pixel is valid when the
/// gradient magnitude exceeds 1e-3.
struct GradientDirectionMap {
  int width = 0;
  int height = 0;
  std::vector<double> angle;   // radians, atan2(gy, gx), in (-pi, pi]
  std::vector<uint8_t> valid;  // 0 or 1

  bool valid_at(int x, int y) const { return valid[static_cast<size_t>(y) * width + x] != 0; }
  double angle_at(int x, int y) const { return angle[static_cast<size_t>(y) * width + x]; }
};

GradientDirectionMap gradient_direction_map(const ImageBuffer& image);

inline constexpr double kGradientValidityTau = 1e-3;

/// Mean over images of (sum of wrapped absolute angle differences over
/// pixels valid in both maps) / (count of such pixels); an image with no
/// mutually valid pixels contributes 0.
double compute_gl(const std::vector<ImageBuffer>& inputs,
                  const std::vector<ImageBuffer>& corrected);

/// 10*log10(1/MSE) over all pixels and channels; +infinity when MSE = 0.
double psnr(const ImageBuffer& image, const ImageBuffer& reference);

/// Least-squares per-channel gain/bias per image minimizing the summed
/// squared mismatch over overlap pixels, anchored by image 0 = identity.
/// Requires a connected overlap graph; output values are clamped to [0,1].
std::vector<ImageBuffer> baseline_gain_bias(const std::vector<ImageBuffer>& images,
                                            const std::vector<OverlapMask>& overlaps);

/// One evaluated correction method: its metric values plus the per-pair CD
/// breakdown.
struct MetricReport {
  std::string method;
  double cd = 0.0;
  double gl = 0.0;
  double wall_seconds = 0.0;
  std::vector<PairContribution> pairs;
};

}  // namespace nerfcc
