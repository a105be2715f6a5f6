// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/scene.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace nerfcc {

using json = nlohmann::json;

bool Primitive::contains(const Vec3& p) const {
  if (kind == Kind::Sphere) return (p - center).norm() <= size[0];
  return ((p - center).cwiseAbs().array() <= 0.5 * size.array()).all();
}

Vec3 Primitive::normal_at(const Vec3& p) const {
  const Vec3 d = p - center;
  if (kind == Kind::Sphere) {
    const double r = d.norm();
    if (r < 1e-12) return Vec3::UnitZ();
    return d / r;
  }
  // Nearest face: the axis with the least interior margin.
  const Vec3 half = 0.5 * size;
  int axis = 0;
  double best = half[0] - std::abs(d[0]);
  for (int a = 1; a < 3; ++a) {
    const double margin = half[a] - std::abs(d[a]);
    if (margin < best) {
      best = margin;
      axis = a;
    }
  }
  Vec3 n = Vec3::Zero();
  n[axis] = d[axis] >= 0.0 ? 1.0 : -1.0;
  return n;
}

void SceneSpec::validate() const {
  for (const Primitive& prim : primitives) {
    if (!(prim.density >= 0.0)) throw DataError("primitive density must be non-negative");
    for (int c = 0; c < 3; ++c)
      if (!(prim.albedo[c] >= 0.0 && prim.albedo[c] <= 1.0))
        throw DataError("primitive albedo channels must be in [0,1]");
    if (prim.kind == Primitive::Kind::Sphere) {
      if (!(prim.size[0] > 0.0)) throw DataError("sphere radius must be positive");
    } else if (!(prim.size.array() > 0.0).all()) {
      throw DataError("box edge lengths must be positive");
    }
    if (!finite(prim.center) || !finite(prim.size)) throw DataError("primitive fields not finite");
  }
  for (int c = 0; c < 3; ++c)
    if (!(background[c] >= 0.0 && background[c] <= 1.0))
      throw DataError("background channels must be in [0,1]");
}

namespace {

const Primitive* dominant(const SceneSpec& scene, const Vec3& p) {
  const Primitive* best = nullptr;
  for (const Primitive& prim : scene.primitives)
    if (prim.contains(p) && (!best || prim.density > best->density)) best = &prim;
  return best;
}

}  // namespace

double SceneSpec::density_at(const Vec3& p) const {
  const Primitive* prim = dominant(*this, p);
  return prim ? prim->density : 0.0;
}

Rgb SceneSpec::albedo_at(const Vec3& p) const {
  const Primitive* prim = dominant(*this, p);
  return prim ? prim->albedo : Rgb::Zero();
}

Vec3 SceneSpec::normal_at(const Vec3& p) const {
  const Primitive* prim = dominant(*this, p);
  return prim ? prim->normal_at(p) : Vec3::UnitZ();
}

std::vector<SceneSpec::Interval> SceneSpec::intersect(const Ray& ray) const {
  std::vector<Interval> out;
  for (size_t k = 0; k < primitives.size(); ++k) {
    const Primitive& prim = primitives[k];
    double t0, t1;
    if (prim.kind == Primitive::Kind::Sphere) {
      const Vec3 oc = ray.origin - prim.center;
      const double b = oc.dot(ray.direction);
      const double c = oc.squaredNorm() - prim.size[0] * prim.size[0];
      const double disc = b * b - c;
      if (disc <= 0.0) continue;
      const double root = std::sqrt(disc);
      t0 = -b - root;
      t1 = -b + root;
    } else {
      const Vec3 half = 0.5 * prim.size;
      t0 = -std::numeric_limits<double>::infinity();
      t1 = std::numeric_limits<double>::infinity();
      bool miss = false;
      for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a] - prim.center[a];
        const double d = ray.direction[a];
        if (std::abs(d) < 1e-15) {
          if (std::abs(o) > half[a]) {
            miss = true;
            break;
          }
          continue;
        }
        double ta = (-half[a] - o) / d;
        double tb = (half[a] - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
      }
      if (miss || t0 >= t1) continue;
    }
    if (t1 > t0) out.push_back({t0, t1, static_cast<int>(k)});
  }
  return out;
}

double SceneSpec::optical_depth(const Ray& ray) const {
  const auto intervals = intersect(ray);
  std::vector<double> cuts{ray.near, ray.far};
  for (const Interval& iv : intervals) {
    if (iv.t_enter > ray.near && iv.t_enter < ray.far) cuts.push_back(iv.t_enter);
    if (iv.t_exit > ray.near && iv.t_exit < ray.far) cuts.push_back(iv.t_exit);
  }
  std::sort(cuts.begin(), cuts.end());
  double tau = 0.0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double len = cuts[i + 1] - cuts[i];
    if (len <= 0.0) continue;
    tau += density_at(ray.at(0.5 * (cuts[i] + cuts[i + 1]))) * len;
  }
  return tau;
}

std::optional<double> SceneSpec::first_hit(const Ray& ray) const {
  if (density_at(ray.at(ray.near)) > 0.0) return ray.near;
  double best = std::numeric_limits<double>::infinity();
  for (const Interval& iv : intersect(ray)) {
    if (primitives[iv.primitive].density <= 0.0) continue;
    if (iv.t_enter >= ray.near && iv.t_enter <= ray.far) best = std::min(best, iv.t_enter);
  }
  if (std::isinf(best)) return std::nullopt;
  return best;
}

SceneSpec load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scene file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("scene file is not valid JSON: " + path + ": " + e.what());
  }
  if (!j.is_object()) throw DataError("scene root must be an object: " + path);
  for (const auto& [key, _] : j.items())
    if (key != "primitives" && key != "background")
      throw DataError("unknown scene key '" + key + "' in " + path);

  SceneSpec scene;
  auto read_vec3 = [&](const json& arr, const char* what) {
    if (!arr.is_array() || arr.size() != 3) throw DataError(std::string(what) + " must be a 3-array");
    return Vec3(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
  };
  if (j.contains("background")) {
    const Vec3 bg = read_vec3(j["background"], "background");
    scene.background = Rgb(bg[0], bg[1], bg[2]);
  }
  if (j.contains("primitives")) {
    if (!j["primitives"].is_array()) throw DataError("primitives must be an array: " + path);
    for (const json& pj : j["primitives"]) {
      if (!pj.is_object()) throw DataError("primitive entries must be objects: " + path);
      for (const auto& [key, _] : pj.items())
        if (key != "kind" && key != "center" && key != "size" && key != "radius" &&
            key != "density" && key != "albedo")
          throw DataError("unknown primitive key '" + key + "' in " + path);
      Primitive prim;
      const std::string kind = pj.at("kind").get<std::string>();
      if (kind == "sphere")
        prim.kind = Primitive::Kind::Sphere;
      else if (kind == "box")
        prim.kind = Primitive::Kind::Box;
      else
        throw DataError("unknown primitive kind '" + kind + "' in " + path);
      prim.center = read_vec3(pj.at("center"), "center");
      if (prim.kind == Primitive::Kind::Sphere) {
        if (pj.contains("size")) throw DataError("spheres take 'radius', not 'size': " + path);
        prim.size = Vec3::Constant(pj.at("radius").get<double>());
      } else {
        if (pj.contains("radius")) throw DataError("boxes take 'size', not 'radius': " + path);
        prim.size = read_vec3(pj.at("size"), "size");
      }
      prim.density = pj.at("density").get<double>();
      const Vec3 alb = read_vec3(pj.at("albedo"), "albedo");
      prim.albedo = Rgb(alb[0], alb[1], alb[2]);
      scene.primitives.push_back(prim);
    }
  }
  scene.validate();
  return scene;
}

void save_scene(const SceneSpec& scene, const std::string& path) {
  json j;
  j["background"] = {scene.background[0], scene.background[1], scene.background[2]};
  j["primitives"] = json::array();
  for (const Primitive& prim : scene.primitives) {
    json pj;
    pj["kind"] = prim.kind == Primitive::Kind::Sphere ? "sphere" : "box";
    pj["center"] = {prim.center[0], prim.center[1], prim.center[2]};
    if (prim.kind == Primitive::Kind::Sphere)
      pj["radius"] = prim.size[0];
    else
      pj["size"] = {prim.size[0], prim.size[1], prim.size[2]};
    pj["density"] = prim.density;
    pj["albedo"] = {prim.albedo[0], prim.albedo[1], prim.albedo[2]};
    j["primitives"].push_back(pj);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write scene file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace nerfcc
