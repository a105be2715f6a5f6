// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/sampling.hpp"

namespace nerfcc {

std::vector<double> stratified_sample(double near, double far, int n_depth, RandomStream& rng) {
  if (!(near < far)) throw DataError("stratified_sample requires near < far");
  if (n_depth < 2) throw DataError("stratified_sample requires n_depth >= 2");
  const double width = (far - near) / n_depth;
  std::vector<double> t(n_depth);
  for (int i = 0; i < n_depth; ++i) t[i] = near + (i + rng.uniform01()) * width;
  return t;
}

RaySampleSet sample_ray(const Ray& ray, int n_depth, RandomStream& rng) {
  RaySampleSet s;
  s.t = stratified_sample(ray.near, ray.far, n_depth, rng);
  s.delta.resize(n_depth);
  s.points.reserve(n_depth);
  for (int i = 0; i < n_depth; ++i) {
    s.delta[i] = (i + 1 < n_depth ? s.t[i + 1] : ray.far) - s.t[i];
    s.points.push_back(ray.at(s.t[i]));
  }
  return s;
}

}  // namespace nerfcc
