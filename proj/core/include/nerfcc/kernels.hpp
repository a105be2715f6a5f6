// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/common.hpp"

#include <Eigen/Dense>

#include <vector>

namespace nerfcc {

// Row-major dense matrices throughout the differentiable pipeline: rows are
// samples/rays/voxels, columns are feature channels.
using MatX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecX = Eigen::VectorXd;

// Numerically stable activations and their derivatives in terms of the input.
double softplus(double x);
double sigmoid(double x);
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// Positional featurization: [p, sin(2^0 pi p), cos(2^0 pi p), ...,
/// sin(2^{n-1} pi p), cos(2^{n-1} pi p)], row per point, 3 + 6*n_freq wide.
MatX pos_encode(const std::vector<Vec3>& points, int n_freq);

/// Prefix transmittance T_i = exp(-sum_{j<i} sigma_j delta_j); T_1 = 1.
/// Throws on negative sigma or non-positive delta.
std::vector<double> transmittance(const std::vector<double>& sigma,
                                  const std::vector<double>& delta);

struct CompositeWeights {
  std::vector<double> w;  // w_i = T_i * (1 - exp(-sigma_i delta_i))
  double opacity = 0.0;   // sum of w
};

CompositeWeights composite_weights(const std::vector<double>& sigma,
                                   const std::vector<double>& delta);

/// Composite of per-sample RGB values plus residual-transmittance background.
Rgb composite_color(const std::vector<double>& sigma, const std::vector<Rgb>& values,
                    const std::vector<double>& delta, const Rgb& background);

}  // namespace nerfcc
