// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/kernels.hpp"

namespace nerfcc {

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

MatX pos_encode(const std::vector<Vec3>& points, int n_freq) {
  if (n_freq < 0) throw DataError("pos_encode requires n_freq >= 0");
  const int m = static_cast<int>(points.size());
  MatX out(m, 3 + 6 * n_freq);
  for (int r = 0; r < m; ++r) {
    const Vec3& p = points[r];
    out(r, 0) = p[0];
    out(r, 1) = p[1];
    out(r, 2) = p[2];
    double freq = M_PI;
    for (int k = 0; k < n_freq; ++k, freq *= 2.0) {
      for (int a = 0; a < 3; ++a) {
        out(r, 3 + 6 * k + a) = std::sin(freq * p[a]);
        out(r, 3 + 6 * k + 3 + a) = std::cos(freq * p[a]);
      }
    }
  }
  return out;
}

namespace {

void check_ray(const std::vector<double>& sigma, const std::vector<double>& delta) {
  if (sigma.size() != delta.size()) throw DataError("sigma/delta length mismatch");
  for (size_t i = 0; i < sigma.size(); ++i) {
    if (!(sigma[i] >= 0.0)) throw NumericError("negative or NaN density in compositing");
    if (!(delta[i] > 0.0)) throw NumericError("non-positive ray segment length");
  }
}

}  // namespace

std::vector<double> transmittance(const std::vector<double>& sigma,
                                  const std::vector<double>& delta) {
  check_ray(sigma, delta);
  std::vector<double> T(sigma.size());
  double acc = 0.0;
  for (size_t i = 0; i < sigma.size(); ++i) {
    T[i] = std::exp(-acc);
    acc += sigma[i] * delta[i];
  }
  return T;
}

CompositeWeights composite_weights(const std::vector<double>& sigma,
                                   const std::vector<double>& delta) {
  check_ray(sigma, delta);
  CompositeWeights out;
  out.w.resize(sigma.size());
  double T = 1.0;
  for (size_t i = 0; i < sigma.size(); ++i) {
    const double alpha = 1.0 - std::exp(-sigma[i] * delta[i]);
    out.w[i] = T * alpha;
    out.opacity += out.w[i];
    T *= 1.0 - alpha;
  }
  return out;
}

Rgb composite_color(const std::vector<double>& sigma, const std::vector<Rgb>& values,
                    const std::vector<double>& delta, const Rgb& background) {
  if (values.size() != sigma.size()) throw DataError("composite value count mismatch");
  const CompositeWeights cw = composite_weights(sigma, delta);
  Rgb out = Rgb::Zero();
  for (size_t i = 0; i < values.size(); ++i) out += cw.w[i] * values[i];
  return out + (1.0 - cw.opacity) * background;
}

}  // namespace nerfcc
