// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/field.hpp"
#include "nerfcc/image.hpp"
#include "nerfcc/sampling.hpp"
#include "nerfcc/sh.hpp"

namespace nerfcc {

struct RenderOptions {
  enum class Mode { Lambertian, Relit };
  int n_depth = 64;
  uint64_t seed = 0;
  Mode mode = Mode::Relit;
  Rgb background = Rgb::Zero();

  void validate() const {
    if (n_depth < 2) throw DataError("render needs n_depth >= 2");
  }
};

// RNG stream purposes (keep distinct across the pipeline).
namespace streams {
inline constexpr uint64_t kPixel = 1;
inline constexpr uint64_t kBatch = 2;
inline constexpr uint64_t kDepth = 3;
inline constexpr uint64_t kPerturb = 4;
}  // namespace streams

/// Normal-estimation step for central differences of the density:
/// 1e-4 of the ray's depth extent (the scene scale at hand).
double normal_fd_step(const Ray& ray);

/// n = normalize(sum_i w_i * (-grad sigma(p_i))), gradient by central finite
/// differences with step h; samples with w_i < 1e-12 are skipped. Falls back
/// to -d when |n_raw| < 1e-9. Constant w.r.t. parameters (stop-gradient).
Vec3 aggregate_normal(const RadianceField& field, const RaySampleSet& samples,
                      const std::vector<double>& weights, const Ray& ray, double h);

/// Batched variant over many rays; one ray per entry. Used by training steps
/// so density queries coalesce into a few matrix products.
std::vector<Vec3> aggregate_normals_batch(const RadianceField& field,
                                          const std::vector<RaySampleSet>& samples,
                                          const std::vector<std::vector<double>>& weights,
                                          const std::vector<Ray>& rays, double h);

/// Plain (non-tape) pixel render. Relit mode: shade(cumulative albedo, L,
/// aggregate normal) + residual-transmittance background; lambertian mode:
/// direct composite of per-point albedo colors.
Rgb render_pixel(const RadianceField& field, const SHLighting& lighting, const Ray& ray,
                 const RenderOptions& opts, RandomStream& rng, double* opacity_out = nullptr);

/// Per-pixel RNG streams derived from (seed, pixel index), so pixel order
/// and parallel chunking never change the output.
ImageBuffer render_image(const RadianceField& field, const SHLighting& lighting,
                         const PinholeCamera& camera, const RenderOptions& opts,
                         ImageBuffer* opacity_out = nullptr);

}  // namespace nerfcc
