// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/image.hpp"
#include "nerfcc/manifest.hpp"
#include "nerfcc/scene.hpp"

#include <string>
#include <vector>

namespace nerfcc {

/// Synthetic dataset layout: a ring of inward-looking cameras around the
/// origin, oracle-rendered under known lightings, optionally color-perturbed
/// per image, with exact overlap masks.
struct SynthConfig {
  int n_views = 8;
  int width = 64;
  int height = 64;
  double radius = 4.0;
  double elevation_deg = 20.0;
  double fov_deg = 45.0;  // vertical field of view
  double near = 2.0;
  double far = 6.0;
  uint64_t seed = 0;
  bool perturb = true;
  int n_lightings = 1;  // 1 = white everywhere; 2 = ring split into halves
  int oracle_steps = 512;

  void validate() const;
};

/// Per-channel color perturbation actually applied to one image.
struct AppliedPerturbation {
  Rgb gain = Rgb::Ones();
  Rgb bias = Rgb::Zero();
  Rgb gamma = Rgb::Ones();
};

struct SynthResult {
  DatasetManifest manifest;          // overlaps reference the written masks
  std::vector<ImageBuffer> images;   // what was written (post-perturbation)
  std::vector<Mask> masks;           // aligned with manifest.overlaps
  std::vector<AppliedPerturbation> perturbations;  // identity when disabled
};

/// Camera `index` of the ring: eye on a circle at the configured elevation,
/// looking at the origin, world +z up.
PinholeCamera ring_camera(const SynthConfig& cfg, int index);

/// The two built-in lightings: 0 = flat white (pure DC), 1 = a warm tint
/// with a vertical first-order component. Distinct but gamut-safe for
/// albedos up to 0.9.
SHLighting synth_lighting(int which);

/// Lighting assigned to view `index` under the config's split.
SHLighting view_lighting(const SynthConfig& cfg, int index);

/// Renders, perturbs, and writes the dataset (images, masks, manifest.json,
/// perturbations.json) into out_dir. A mask pixel is set iff both views'
/// rays through that pixel hit a surface point that is inside the other
/// camera's frustum and unoccluded from it.
SynthResult synthesize_dataset(const SceneSpec& scene, const SynthConfig& cfg,
                               const std::string& out_dir);

}  // namespace nerfcc
