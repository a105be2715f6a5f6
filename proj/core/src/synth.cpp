// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/synth.hpp"

#include "nerfcc/oracle.hpp"
#include "nerfcc/renderer.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace nerfcc {

namespace {

constexpr double kGainLo = 0.7, kGainHi = 1.3;
constexpr double kBiasLo = -0.1, kBiasHi = 0.1;
constexpr double kGammaLo = 0.8, kGammaHi = 1.25;

std::string view_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d.png", i);
  return buf;
}

std::string mask_name(int i, int j) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "mask_%03d_%03d.png", i, j);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_views < 1) throw UsageError("synth needs at least one view");
  if (width < 3 || height < 3) throw UsageError("synth images must be at least 3x3");
  if (!(radius > 0.0)) throw UsageError("camera ring radius must be positive");
  if (!(fov_deg > 0.0) || fov_deg >= 180.0) throw UsageError("field of view out of range");
  if (!(near > 0.0) || !(far > near)) throw UsageError("need 0 < near < far");
  if (std::fabs(elevation_deg) >= 90.0) throw UsageError("elevation must stay below the pole");
  if (n_lightings < 1 || n_lightings > 2) throw UsageError("n_lightings must be 1 or 2");
  if (oracle_steps < 64) throw UsageError("oracle_steps must be >= 64");
}

PinholeCamera ring_camera(const SynthConfig& cfg, int index) {
  const double phi = cfg.elevation_deg * std::numbers::pi / 180.0;
  const double theta = 2.0 * std::numbers::pi * index / cfg.n_views;
  PinholeCamera cam;
  cam.width = cfg.width;
  cam.height = cfg.height;
  cam.fy = 0.5 * cfg.height / std::tan(0.5 * cfg.fov_deg * std::numbers::pi / 180.0);
  cam.fx = cam.fy;
  cam.cx = 0.5 * cfg.width;
  cam.cy = 0.5 * cfg.height;
  cam.near = cfg.near;
  cam.far = cfg.far;
  cam.translation = cfg.radius * Vec3(std::cos(theta) * std::cos(phi),
                                      std::sin(theta) * std::cos(phi), std::sin(phi));
  const Vec3 forward = (-cam.translation).normalized();
  const Vec3 up = Vec3::UnitZ();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = down;
  cam.rotation.col(2) = forward;
  cam.validate();
  return cam;
}

SHLighting synth_lighting(int which) {
  if (which == 0) return SHLighting::dc_white();
  if (which != 1) throw UsageError("only two built-in lightings exist");
  SHLighting l;
  l.coeff[0] = Rgb(0.9, 0.8, 0.7) / kShDc;
  l.coeff[2] = Rgb::Constant(0.35);  // vertical first-order band
  return l;
}

SHLighting view_lighting(const SynthConfig& cfg, int index) {
  if (cfg.n_lightings <= 1) return synth_lighting(0);
  return synth_lighting(index < (cfg.n_views + 1) / 2 ? 0 : 1);
}

namespace {

/// First-hit parameter per pixel, -1 where the ray sees background.
std::vector<double> first_hit_map(const SceneSpec& scene, const PinholeCamera& cam) {
  std::vector<double> t(static_cast<size_t>(cam.width) * cam.height, -1.0);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const auto hit = scene.first_hit(cam.generate_ray(x, y));
      if (hit) t[static_cast<size_t>(y) * cam.width + x] = *hit;
    }
  return t;
}

/// Surface point behind pixel (x,y) of cam_a exists, lies inside cam_b's
/// frustum within its depth range, and is unoccluded from cam_b.
bool surface_seen_by_other(const SceneSpec& scene, const PinholeCamera& cam_a,
                           const PinholeCamera& cam_b, int x, int y, double t_hit) {
  if (t_hit < 0.0) return false;
  const Vec3 p = cam_a.generate_ray(x, y).at(t_hit);
  if (!cam_b.in_frustum(p)) return false;
  const double depth = cam_b.world_to_camera(p).z();
  if (depth < cam_b.near || depth > cam_b.far) return false;
  const Vec3 d = p - cam_b.translation;
  const double dist = d.norm();
  Ray vis;
  vis.origin = cam_b.translation;
  vis.direction = d / dist;
  vis.near = 1e-9;
  vis.far = dist * (1.0 + 1e-6) + 1e-9;
  const auto hit = scene.first_hit(vis);
  return hit && std::fabs(*hit - dist) <= 1e-6 * std::max(1.0, dist);
}

AppliedPerturbation draw_perturbation(uint64_t seed, int image_index) {
  RandomStream rng(substream(seed, streams::kPerturb, static_cast<uint64_t>(image_index)));
  AppliedPerturbation p;
  for (int c = 0; c < 3; ++c) p.gain[c] = rng.uniform(kGainLo, kGainHi);
  for (int c = 0; c < 3; ++c) p.bias[c] = rng.uniform(kBiasLo, kBiasHi);
  for (int c = 0; c < 3; ++c) p.gamma[c] = rng.uniform(kGammaLo, kGammaHi);
  return p;
}

void write_perturbations_json(const std::vector<AppliedPerturbation>& perturbations, bool applied,
                              uint64_t seed, const std::string& path) {
  nlohmann::json root;
  root["seed"] = seed;
  root["perturbed"] = applied;
  nlohmann::json images = nlohmann::json::array();
  for (size_t i = 0; i < perturbations.size(); ++i) {
    const AppliedPerturbation& p = perturbations[i];
    nlohmann::json e;
    e["index"] = i;
    e["gain"] = {p.gain[0], p.gain[1], p.gain[2]};
    e["bias"] = {p.bias[0], p.bias[1], p.bias[2]};
    e["gamma"] = {p.gamma[0], p.gamma[1], p.gamma[2]};
    images.push_back(e);
  }
  root["images"] = images;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write perturbation record: " + path);
  out << root.dump(2) << "\n";
}

}  // namespace

SynthResult synthesize_dataset(const SceneSpec& scene, const SynthConfig& cfg,
                               const std::string& out_dir) {
  namespace fs = std::filesystem;
  cfg.validate();
  scene.validate();
  fs::create_directories(out_dir);

  SynthResult result;
  result.manifest.seed = cfg.seed;
  result.manifest.base_dir = out_dir;

  std::vector<PinholeCamera> cameras;
  for (int i = 0; i < cfg.n_views; ++i) {
    const PinholeCamera cam = ring_camera(cfg, i);
    const SHLighting light = view_lighting(cfg, i);
    ImageBuffer img = render_oracle(scene, cam, light, cfg.oracle_steps);
    AppliedPerturbation pert;
    if (cfg.perturb) {
      pert = draw_perturbation(cfg.seed, i);
      img = perturb_colors(img, pert.gain, pert.bias, pert.gamma);
    }
    const std::string name = view_name(i);
    save_image(img, (fs::path(out_dir) / name).string());
    result.images.push_back(std::move(img));
    result.perturbations.push_back(pert);
    result.manifest.images.push_back({name, cam, light});
    cameras.push_back(cam);
  }

  std::vector<std::vector<double>> hits;
  hits.reserve(cameras.size());
  for (const PinholeCamera& cam : cameras) hits.push_back(first_hit_map(scene, cam));

  for (int i = 0; i < cfg.n_views; ++i)
    for (int j = i + 1; j < cfg.n_views; ++j) {
      Mask m = make_mask(cfg.width, cfg.height, false);
      for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
          const size_t k = static_cast<size_t>(y) * cfg.width + x;
          const bool ij =
              surface_seen_by_other(scene, cameras[i], cameras[j], x, y, hits[i][k]);
          const bool ji =
              ij && surface_seen_by_other(scene, cameras[j], cameras[i], x, y, hits[j][k]);
          m.set(x, y, ij && ji);
        }
      if (m.area() == 0) continue;
      const std::string name = mask_name(i, j);
      save_mask(m, (fs::path(out_dir) / name).string());
      result.manifest.overlaps.push_back({i, j, name});
      result.masks.push_back(std::move(m));
    }

  save_manifest(result.manifest, (fs::path(out_dir) / "manifest.json").string());
  write_perturbations_json(result.perturbations, cfg.perturb, cfg.seed,
                           (fs::path(out_dir) / "perturbations.json").string());
  return result;
}

}  // namespace nerfcc
