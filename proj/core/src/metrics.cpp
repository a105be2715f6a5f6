// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

namespace nerfcc {

ColorHistogram color_histogram(const ImageBuffer& image, const Mask& mask, int n_bins) {
  if (n_bins < 2) throw DataError("histogram needs at least 2 bins");
  if (mask.width != image.width || mask.height != image.height)
    throw DataError("mask dimensions do not match the image");
  ColorHistogram h;
  h.n_bins = n_bins;
  for (int c = 0; c < 3; ++c) h.bins[c].assign(n_bins, 0.0);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      if (!mask.at(x, y)) continue;
      ++h.pixel_count;
      for (int c = 0; c < 3; ++c) {
        const double v = image.at(x, y, c);
        if (v < 0.0 || v > 1.0 || !std::isfinite(v))
          throw DataError("histogram input value outside [0,1]");
        const int bin = std::min(static_cast<int>(std::floor(v * n_bins)), n_bins - 1);
        h.bins[c][bin] += 1.0;
      }
    }
  if (h.pixel_count == 0) throw DataError("histogram over an empty mask is undefined");
  const double inv = 1.0 / static_cast<double>(h.pixel_count);
  for (int c = 0; c < 3; ++c)
    for (double& b : h.bins[c]) b *= inv;
  return h;
}

double delta_h(const ColorHistogram& a, const ColorHistogram& b) {
  if (a.n_bins != b.n_bins) throw DataError("histogram bin counts differ");
  double total = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < a.n_bins; ++k) total += std::fabs(a.bins[c][k] - b.bins[c][k]);
  return total / 3.0;
}

double compute_cd(const std::vector<ImageBuffer>& images, const std::vector<OverlapMask>& overlaps,
                  int n_bins, std::vector<PairContribution>* contributions) {
  if (overlaps.empty()) throw DataError("CD needs at least one overlapping pair");
  const int n = static_cast<int>(images.size());
  double total_area = 0.0;
  for (const OverlapMask& o : overlaps) {
    if (o.i < 0 || o.i >= n || o.j < 0 || o.j >= n || o.i == o.j)
      throw DataError("overlap pair indices out of range");
    total_area += static_cast<double>(o.mask.area());
  }
  if (total_area == 0.0) throw DataError("all overlap masks are empty");
  double cd = 0.0;
  if (contributions) contributions->clear();
  for (const OverlapMask& o : overlaps) {
    const ColorHistogram hi = color_histogram(images[o.i], o.mask, n_bins);
    const ColorHistogram hj = color_histogram(images[o.j], o.mask, n_bins);
    const double w = static_cast<double>(o.mask.area()) / total_area;
    const double dh = delta_h(hi, hj);
    const double contribution = w * dh / n_bins;
    cd += contribution;
    if (contributions) contributions->push_back({o.i, o.j, w, dh, contribution});
  }
  return cd;
}

GradientDirectionMap gradient_direction_map(const ImageBuffer& image) {
  if (image.width < 3 || image.height < 3)
    throw DataError("gradient direction map needs an image of at least 3x3");
  const int W = image.width;
  const int H = image.height;
  GradientDirectionMap m;
  m.width = W;
  m.height = H;
  m.angle.assign(static_cast<size_t>(W) * H, 0.0);
  m.valid.assign(static_cast<size_t>(W) * H, 0);
  auto gray = [&image](int x, int y) {
    return (image.at(x, y, 0) + image.at(x, y, 1) + image.at(x, y, 2)) / 3.0;
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int xm = x > 0 ? x - 1 : 0;
      const int xp = x < W - 1 ? x + 1 : W - 1;
      const int ym = y > 0 ? y - 1 : 0;
      const int yp = y < H - 1 ? y + 1 : H - 1;
      const double gx = (gray(xp, y) - gray(xm, y)) / 2.0;
      const double gy = (gray(x, yp) - gray(x, ym)) / 2.0;
      const size_t k = static_cast<size_t>(y) * W + x;
      if (std::sqrt(gx * gx + gy * gy) > kGradientValidityTau) {
        m.angle[k] = std::atan2(gy, gx);
        m.valid[k] = 1;
      }
    }
  return m;
}

namespace {

double wrapped_abs_diff(double a, double b) {
  double d = std::fabs(a - b);
  if (d > std::numbers::pi) d = 2.0 * std::numbers::pi - d;
  return d;
}

}  // namespace

double compute_gl(const std::vector<ImageBuffer>& inputs,
                  const std::vector<ImageBuffer>& corrected) {
  if (inputs.size() != corrected.size()) throw DataError("GL needs equal-length image lists");
  if (inputs.empty()) throw DataError("GL over an empty image list");
  double total = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].same_dims(corrected[i]))
      throw DataError("GL image dimensions differ at index " + std::to_string(i));
    const GradientDirectionMap a = gradient_direction_map(inputs[i]);
    const GradientDirectionMap b = gradient_direction_map(corrected[i]);
    double acc = 0.0;
    size_t n_valid = 0;
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x)
        if (a.valid_at(x, y) && b.valid_at(x, y)) {
          acc += wrapped_abs_diff(a.angle_at(x, y), b.angle_at(x, y));
          ++n_valid;
        }
    if (n_valid > 0) total += acc / static_cast<double>(n_valid);
  }
  return total / static_cast<double>(inputs.size());
}

double psnr(const ImageBuffer& image, const ImageBuffer& reference) {
  if (!image.same_dims(reference)) throw DataError("PSNR image dimensions differ");
  if (image.data.empty()) throw DataError("PSNR over an empty image");
  double acc = 0.0;
  for (size_t k = 0; k < image.data.size(); ++k) {
    const double d = image.data[k] - reference.data[k];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(image.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

void check_connected(int n_images, const std::vector<OverlapMask>& overlaps) {
  std::vector<std::vector<int>> adj(n_images);
  for (const OverlapMask& o : overlaps)
    if (o.mask.area() > 0) {
      adj[o.i].push_back(o.j);
      adj[o.j].push_back(o.i);
    }
  std::vector<int> component(n_images, -1);
  int n_components = 0;
  for (int s = 0; s < n_images; ++s) {
    if (component[s] >= 0) continue;
    const int id = n_components++;
    std::queue<int> q;
    q.push(s);
    component[s] = id;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u])
        if (component[v] < 0) {
          component[v] = id;
          q.push(v);
        }
    }
  }
  if (n_components <= 1) return;
  std::ostringstream msg;
  msg << "overlap graph is disconnected:";
  for (int id = 0; id < n_components; ++id) {
    msg << " {";
    bool first = true;
    for (int i = 0; i < n_images; ++i)
      if (component[i] == id) {
        if (!first) msg << ",";
        msg << i;
        first = false;
      }
    msg << "}";
  }
  throw DataError(msg.str());
}

}  // namespace

std::vector<ImageBuffer> baseline_gain_bias(const std::vector<ImageBuffer>& images,
                                            const std::vector<OverlapMask>& overlaps) {
  const int n = static_cast<int>(images.size());
  if (n == 0) throw DataError("gain/bias baseline needs at least one image");
  for (const OverlapMask& o : overlaps) {
    if (o.i < 0 || o.i >= n || o.j < 0 || o.j >= n || o.i == o.j)
      throw DataError("overlap pair indices out of range");
    if (o.mask.width != images[o.i].width || o.mask.height != images[o.i].height ||
        o.mask.width != images[o.j].width || o.mask.height != images[o.j].height)
      throw DataError("overlap mask dimensions do not match its images");
  }
  check_connected(n, overlaps);
  if (n == 1) return images;

  // Unknowns per channel: (gain, bias) for images 1..n-1; image 0 is the
  // anchor with gain 1, bias 0. Normal equations of the pairwise residuals
  // g_i v_i + b_i - g_j v_j - b_j.
  const int dim = 2 * (n - 1);
  std::vector<ImageBuffer> out = images;
  for (int c = 0; c < 3; ++c) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (const OverlapMask& o : overlaps) {
      for (int y = 0; y < o.mask.height; ++y)
        for (int x = 0; x < o.mask.width; ++x) {
          if (!o.mask.at(x, y)) continue;
          // residual = sum_k coeff_k * theta_k + constant
          int idx[4];
          double coeff[4];
          int m = 0;
          double constant = 0.0;
          const double vi = images[o.i].at(x, y, c);
          const double vj = images[o.j].at(x, y, c);
          if (o.i == 0) {
            constant += vi;
          } else {
            idx[m] = 2 * (o.i - 1);
            coeff[m++] = vi;
            idx[m] = 2 * (o.i - 1) + 1;
            coeff[m++] = 1.0;
          }
          if (o.j == 0) {
            constant -= vj;
          } else {
            idx[m] = 2 * (o.j - 1);
            coeff[m++] = -vj;
            idx[m] = 2 * (o.j - 1) + 1;
            coeff[m++] = -1.0;
          }
          for (int a = 0; a < m; ++a) {
            for (int b = 0; b < m; ++b) H(idx[a], idx[b]) += coeff[a] * coeff[b];
            rhs[idx[a]] -= coeff[a] * constant;
          }
        }
    }
    const Eigen::VectorXd theta = H.ldlt().solve(rhs);
    if (!theta.allFinite()) throw NumericError("gain/bias least squares produced non-finite values");
    for (int i = 1; i < n; ++i) {
      const double g = theta[2 * (i - 1)];
      const double b = theta[2 * (i - 1) + 1];
      ImageBuffer& img = out[i];
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) img.at(x, y, c) = clamp01(g * images[i].at(x, y, c) + b);
    }
  }
  return out;
}

}  // namespace nerfcc
