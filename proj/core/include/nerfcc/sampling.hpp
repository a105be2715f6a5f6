// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/camera.hpp"

#include <vector>

namespace nerfcc {

/// Depths, segment lengths, and world points of one ray's samples.
/// delta_i = t_{i+1} - t_i with the last delta closed by far - t_N.
struct RaySampleSet {
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<Vec3> points;
};

/// One uniform draw per equal-width stratum of [near, far); sorted by
/// construction.
std::vector<double> stratified_sample(double near, double far, int n_depth, RandomStream& rng);

RaySampleSet sample_ray(const Ray& ray, int n_depth, RandomStream& rng);

}  // namespace nerfcc
