// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/common.hpp"

namespace nerfcc {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit length
  double near = 0.0;
  double far = 1.0;

  Vec3 at(double t) const { return origin + t * direction; }
};

/// Camera-to-world pose with pinhole intrinsics. Camera frame: +x right,
/// +y down, +z forward (towards the scene).
struct PinholeCamera {
  int width = 0;
  int height = 0;
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  Mat3 rotation = Mat3::Identity();  // camera-to-world
  Vec3 translation = Vec3::Zero();   // camera center in world
  double near = 0.0;
  double far = 0.0;

  /// Throws DataError on non-positive dims/focals, non-finite entries,
  /// non-orthonormal rotation, or far <= near > 0 violations.
  void validate() const;

  /// Ray through the center of pixel (px, py).
  Ray generate_ray(int px, int py) const;

  /// World point to continuous pixel coordinates; in_front = depth > 0.
  /// Coordinates are in the pixel-center convention of generate_ray.
  Vec3 world_to_camera(const Vec3& p) const { return rotation.transpose() * (p - translation); }
  bool project(const Vec3& p, double& px, double& py) const;

  /// True iff p projects inside the image rectangle with positive depth.
  bool in_frustum(const Vec3& p) const;
};

}  // namespace nerfcc
