// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/renderer.hpp"

#include "nerfcc/threading.hpp"

namespace nerfcc {

double normal_fd_step(const Ray& ray) { return 1e-4 * (ray.far - ray.near); }

namespace {
constexpr double kNormalWeightCutoff = 1e-12;
constexpr double kDegenerateNormal = 1e-9;
}  // namespace

std::vector<Vec3> aggregate_normals_batch(const RadianceField& field,
                                          const std::vector<RaySampleSet>& samples,
                                          const std::vector<std::vector<double>>& weights,
                                          const std::vector<Ray>& rays, double h) {
  if (samples.size() != weights.size() || samples.size() != rays.size())
    throw DataError("aggregate_normals_batch length mismatch");

  // Flatten the +-h probes of every contributing sample into one query.
  std::vector<Vec3> queries;
  struct Slot {
    int ray;
    double w;
  };
  std::vector<Slot> slots;
  for (size_t r = 0; r < samples.size(); ++r) {
    for (size_t i = 0; i < samples[r].points.size(); ++i) {
      const double w = weights[r][i];
      if (w < kNormalWeightCutoff) continue;
      slots.push_back({static_cast<int>(r), w});
      const Vec3& p = samples[r].points[i];
      for (int a = 0; a < 3; ++a) {
        Vec3 up = p, down = p;
        up[a] += h;
        down[a] -= h;
        queries.push_back(up);
        queries.push_back(down);
      }
    }
  }

  std::vector<Vec3> normals(rays.size());
  std::vector<Vec3> raw(rays.size(), Vec3::Zero());
  if (!slots.empty()) {
    const VecX sigma = field.density_batch(queries);
    for (size_t s = 0; s < slots.size(); ++s) {
      Vec3 grad;
      for (int a = 0; a < 3; ++a) {
        const int base = static_cast<int>(6 * s) + 2 * a;
        grad[a] = (sigma[base] - sigma[base + 1]) / (2.0 * h);
      }
      raw[slots[s].ray] -= slots[s].w * grad;
    }
  }
  for (size_t r = 0; r < rays.size(); ++r) {
    const double n = raw[r].norm();
    normals[r] = n < kDegenerateNormal ? Vec3(-rays[r].direction) : Vec3(raw[r] / n);
  }
  return normals;
}

Vec3 aggregate_normal(const RadianceField& field, const RaySampleSet& samples,
                      const std::vector<double>& weights, const Ray& ray, double h) {
  return aggregate_normals_batch(field, {samples}, {weights}, {ray}, h)[0];
}

Rgb render_pixel(const RadianceField& field, const SHLighting& lighting, const Ray& ray,
                 const RenderOptions& opts, RandomStream& rng, double* opacity_out) {
  opts.validate();
  const RaySampleSet s = sample_ray(ray, opts.n_depth, rng);
  VecX sigma;
  MatX albedo;
  field.query_batch(s.points, sigma, albedo);

  std::vector<double> sig(sigma.data(), sigma.data() + sigma.size());
  const CompositeWeights cw = composite_weights(sig, s.delta);
  if (opacity_out) *opacity_out = cw.opacity;

  if (opts.mode == RenderOptions::Mode::Lambertian) {
    Rgb out = Rgb::Zero();
    for (int i = 0; i < albedo.rows(); ++i)
      out += cw.w[i] * Rgb(albedo(i, 0), albedo(i, 1), albedo(i, 2));
    return out + (1.0 - cw.opacity) * opts.background;
  }

  Rgb cumulative = Rgb::Zero();
  for (int i = 0; i < albedo.rows(); ++i)
    cumulative += cw.w[i] * Rgb(albedo(i, 0), albedo(i, 1), albedo(i, 2));
  const Vec3 n = aggregate_normal(field, s, cw.w, ray, normal_fd_step(ray));
  return shade(cumulative, lighting, n) + (1.0 - cw.opacity) * opts.background;
}

ImageBuffer render_image(const RadianceField& field, const SHLighting& lighting,
                         const PinholeCamera& camera, const RenderOptions& opts,
                         ImageBuffer* opacity_out) {
  opts.validate();
  camera.validate();
  ImageBuffer out(camera.width, camera.height);
  if (opacity_out) *opacity_out = ImageBuffer(camera.width, camera.height);
  parallel_chunks(camera.height, [&](int y) {
    for (int x = 0; x < camera.width; ++x) {
      const uint64_t pixel = static_cast<uint64_t>(y) * camera.width + x;
      RandomStream rng(substream(opts.seed, streams::kPixel, pixel));
      double opacity = 0.0;
      const Rgb c = render_pixel(field, lighting, camera.generate_ray(x, y), opts, rng, &opacity);
      out.set_pixel(x, y, c);
      if (opacity_out) opacity_out->set_pixel(x, y, Rgb::Constant(opacity));
    }
  });
  return out;
}

}  // namespace nerfcc
