// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/camera.hpp"
#include "nerfcc/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nerfcc {

/// Constant-density primitive. For spheres `size` is the radius (x component,
/// others ignored); for boxes `size` holds the full edge lengths.
struct Primitive {
  enum class Kind { Sphere, Box };
  Kind kind = Kind::Sphere;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  double density = 0.0;      // interior sigma_0 >= 0
  Rgb albedo = Rgb::Zero();  // channels in [0,1]

  bool contains(const Vec3& p) const;
  /// Outward surface normal of the closest surface point (radial for
  /// spheres, nearest face for boxes). Defined everywhere except the center.
  Vec3 normal_at(const Vec3& p) const;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  Rgb background = Rgb::Zero();

  void validate() const;

  /// Max over containing primitives (0 outside everything).
  double density_at(const Vec3& p) const;
  /// Albedo and outward normal of the highest-density primitive containing p;
  /// zero albedo and +z normal in empty space.
  Rgb albedo_at(const Vec3& p) const;
  Vec3 normal_at(const Vec3& p) const;

  /// Entry/exit parameters of ray against every primitive, used by the
  /// analytic oracle and by exact mask construction.
  struct Interval {
    double t_enter;
    double t_exit;
    int primitive;
  };
  std::vector<Interval> intersect(const Ray& ray) const;

  /// Optical depth accumulated along [near, far] of the ray, exact
  /// (sum of sigma_0 * chord length over disjoint pieces).
  double optical_depth(const Ray& ray) const;

  /// Parameter of the first surface crossed by the ray within [near, far].
  std::optional<double> first_hit(const Ray& ray) const;
};

SceneSpec load_scene(const std::string& path);
void save_scene(const SceneSpec& scene, const std::string& path);

}  // namespace nerfcc
