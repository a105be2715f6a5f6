// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/camera.hpp"
#include "nerfcc/image.hpp"
#include "nerfcc/scene.hpp"
#include "nerfcc/sh.hpp"

namespace nerfcc {

/// Midpoint quadrature of the continuous volume-rendering integral along one
/// ray: piecewise-constant density per cell, alpha = 1 - exp(-sigma*dt),
/// shading albedo(p) ⊙ L b(n(p)) with the scene's analytic normals, plus
/// pass-through background weighted by the final transmittance.
Rgb oracle_pixel(const SceneSpec& scene, const Ray& ray, const SHLighting& lighting, int n_steps);

/// Independent, deterministic reference renderer (n_steps >= 64).
ImageBuffer render_oracle(const SceneSpec& scene, const PinholeCamera& camera,
                          const SHLighting& lighting, int n_steps = 512);

}  // namespace nerfcc
