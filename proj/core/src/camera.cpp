// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/camera.hpp"

#include <Eigen/LU>

namespace nerfcc {

void PinholeCamera::validate() const {
  if (width <= 0 || height <= 0) throw DataError("camera image dimensions must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw DataError("camera focal lengths must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw DataError("camera principal point not finite");
  if (!rotation.allFinite() || !finite(translation)) throw DataError("camera pose not finite");
  const Mat3 rtr = rotation.transpose() * rotation;
  if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw DataError("camera rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw DataError("camera rotation must have determinant +1");
  if (!(near > 0.0) || !(far > near)) throw DataError("camera requires 0 < near < far");
}

Ray PinholeCamera::generate_ray(int px, int py) const {
  if (px < 0 || px >= width || py < 0 || py >= height)
    throw DataError("pixel index outside the image");
  const Vec3 dir_cam((px + 0.5 - cx) / fx, (py + 0.5 - cy) / fy, 1.0);
  Ray ray;
  ray.origin = translation;
  ray.direction = (rotation * dir_cam).normalized();
  ray.near = near;
  ray.far = far;
  return ray;
}

bool PinholeCamera::project(const Vec3& p, double& px, double& py) const {
  const Vec3 cam = world_to_camera(p);
  if (!(cam.z() > 0.0)) {
    px = py = 0.0;
    return false;
  }
  px = fx * cam.x() / cam.z() + cx - 0.5;
  py = fy * cam.y() / cam.z() + cy - 0.5;
  return true;
}

bool PinholeCamera::in_frustum(const Vec3& p) const {
  double px = 0.0, py = 0.0;
  if (!project(p, px, py)) return false;
  return px >= -0.5 && px <= width - 0.5 && py >= -0.5 && py <= height - 0.5;
}

}  // namespace nerfcc
