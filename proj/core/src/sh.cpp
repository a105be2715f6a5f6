// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/sh.hpp"

namespace nerfcc {

std::array<double, kShCoeffs> sh_basis(const Vec3& n) {
  if (std::abs(n.norm() - 1.0) > 1e-6) throw NumericError("sh_basis requires a unit vector");
  const double x = n[0], y = n[1], z = n[2];
  return {
      0.282095,
      0.488603 * y,
      0.488603 * z,
      0.488603 * x,
      1.092548 * x * y,
      1.092548 * y * z,
      0.315392 * (3.0 * z * z - 1.0),
      1.092548 * x * z,
      0.546274 * (x * x - y * y),
  };
}

Rgb shade(const Rgb& albedo, const SHLighting& lighting, const Vec3& n) {
  return albedo * lighting.eval(sh_basis(n));
}

}  // namespace nerfcc
