// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/common.hpp"

#include <array>

namespace nerfcc {

/// Real spherical harmonics up to band 2, Ramamoorthi-style constants.
/// Order: Y00; Y1-1(y), Y10(z), Y11(x); Y2-2(xy), Y2-1(yz), Y20(3z^2-1),
/// Y21(xz), Y22(x^2-y^2).
inline constexpr int kShCoeffs = 9;
inline constexpr double kShDc = 0.282095;

std::array<double, kShCoeffs> sh_basis(const Vec3& n);

/// Per-image trainable lighting: 9 SH coefficients per color channel.
struct SHLighting {
  // coeff[k][c]: SH coefficient k, channel c. Eigen default-construction
  // leaves values indeterminate, so zero-fill explicitly.
  std::array<Rgb, kShCoeffs> coeff = zeroed();

  static std::array<Rgb, kShCoeffs> zeroed() {
    std::array<Rgb, kShCoeffs> a;
    a.fill(Rgb::Zero());
    return a;
  }

  static SHLighting dc_white() {
    SHLighting l;
    l.coeff[0] = Rgb::Constant(1.0 / kShDc);
    return l;
  }

  Rgb eval(const std::array<double, kShCoeffs>& basis) const {
    Rgb out = Rgb::Zero();
    for (int k = 0; k < kShCoeffs; ++k) out += coeff[k] * basis[k];
    return out;
  }
};

/// out_c = albedo_c * sum_k L[k,c] * b_k(n). Not clamped.
Rgb shade(const Rgb& albedo, const SHLighting& lighting, const Vec3& n);

}  // namespace nerfcc
