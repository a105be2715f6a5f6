// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/oracle.hpp"

#include "nerfcc/threading.hpp"

namespace nerfcc {

Rgb oracle_pixel(const SceneSpec& scene, const Ray& ray, const SHLighting& lighting, int n_steps) {
  const double dt = (ray.far - ray.near) / n_steps;
  double transmittance = 1.0;
  Rgb color = Rgb::Zero();
  for (int k = 0; k < n_steps; ++k) {
    const Vec3 p = ray.at(ray.near + (k + 0.5) * dt);
    const double sigma = scene.density_at(p);
    if (sigma <= 0.0) continue;
    const double alpha = 1.0 - std::exp(-sigma * dt);
    color += transmittance * alpha * shade(scene.albedo_at(p), lighting, scene.normal_at(p));
    transmittance *= 1.0 - alpha;
    if (transmittance < 1e-15) break;
  }
  return color + transmittance * scene.background;
}

ImageBuffer render_oracle(const SceneSpec& scene, const PinholeCamera& camera,
                          const SHLighting& lighting, int n_steps) {
  if (n_steps < 64) throw DataError("render_oracle requires n_steps >= 64");
  scene.validate();
  camera.validate();
  ImageBuffer out(camera.width, camera.height);
  parallel_chunks(camera.height, [&](int y) {
    for (int x = 0; x < camera.width; ++x)
      out.set_pixel(x, y, oracle_pixel(scene, camera.generate_ray(x, y), lighting, n_steps));
  });
  return out;
}

}  // namespace nerfcc
