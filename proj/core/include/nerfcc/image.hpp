// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/common.hpp"

#include <string>
#include <vector>

namespace nerfcc {

/// H x W x 3 image of real-valued RGB radiance in [0,1], row-major.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // width*height*3

  ImageBuffer() = default;
  ImageBuffer(int w, int h, const Rgb& fill = Rgb::Zero());

  double& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

  Rgb pixel(int x, int y) const {
    const double* p = &data[(static_cast<size_t>(y) * width + x) * 3];
    return Rgb(p[0], p[1], p[2]);
  }
  void set_pixel(int x, int y, const Rgb& v) {
    double* p = &data[(static_cast<size_t>(y) * width + x) * 3];
    p[0] = v[0];
    p[1] = v[1];
    p[2] = v[2];
  }

  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool same_dims(const ImageBuffer& other) const {
    return width == other.width && height == other.height;
  }
};

/// Reads an 8-bit RGB PNG; byte v maps to v/255 exactly. Rejects any other
/// bit depth or channel count with an error that names the path.
ImageBuffer load_image(const std::string& path);

/// Writes an 8-bit RGB PNG; channel byte = floor(clamp(v,0,1)*255 + 0.5)
/// (round-half-up, so golden files are bit-exact).
void save_image(const ImageBuffer& image, const std::string& path);

/// out = clamp(gain * v^gamma + bias, 0, 1) per channel.
ImageBuffer perturb_colors(const ImageBuffer& image, const Rgb& gain, const Rgb& bias,
                           const Rgb& gamma);

/// Binary region mask with image dimensions.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> in;  // width*height, 0 or 1

  bool at(int x, int y) const { return in[static_cast<size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { in[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
  size_t area() const;
};

Mask make_mask(int width, int height, bool fill = false);

/// A pixel is in-mask iff its red channel is >= 0.5 after load.
Mask load_mask(const std::string& path);
void save_mask(const Mask& mask, const std::string& path);

}  // namespace nerfcc
