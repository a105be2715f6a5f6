// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace nerfcc {

ImageBuffer::ImageBuffer(int w, int h, const Rgb& fill) : width(w), height(h) {
  data.resize(static_cast<size_t>(w) * h * 3);
  for (size_t i = 0; i < data.size(); i += 3) {
    data[i] = fill[0];
    data[i + 1] = fill[1];
    data[i + 2] = fill[2];
  }
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageBuffer load_image(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open image: " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    throw DataError("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png read init failed: " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png info init failed: " + path);
  }
  std::vector<png_bytep> rows;
  std::vector<png_byte> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png decode failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth != 8 || color != PNG_COLOR_TYPE_RGB) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("image must be 8-bit RGB: " + path);
  }

  pixels.resize(static_cast<size_t>(w) * h * 3);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = &pixels[static_cast<size_t>(y) * w * 3];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageBuffer out(static_cast<int>(w), static_cast<int>(h));
  for (size_t i = 0; i < pixels.size(); ++i) out.data[i] = pixels[i] / 255.0;
  return out;
}

void save_image(const ImageBuffer& image, const std::string& path) {
  if (image.width <= 0 || image.height <= 0) throw DataError("cannot save empty image: " + path);
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write image: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png write init failed: " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png info init failed: " + path);
  }
  std::vector<png_byte> pixels(static_cast<size_t>(image.width) * image.height * 3);
  std::vector<png_bytep> rows(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png encode failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  for (size_t i = 0; i < pixels.size(); ++i) {
    const double v = clamp01(image.data[i]);
    pixels[i] = static_cast<png_byte>(std::floor(v * 255.0 + 0.5));
  }
  for (int y = 0; y < image.height; ++y)
    rows[y] = &pixels[static_cast<size_t>(y) * image.width * 3];
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageBuffer perturb_colors(const ImageBuffer& image, const Rgb& gain, const Rgb& bias,
                           const Rgb& gamma) {
  for (int c = 0; c < 3; ++c) {
    if (!(gain[c] > 0.0)) throw DataError("color perturbation gain must be positive");
    if (!(gamma[c] > 0.0)) throw DataError("color perturbation gamma must be positive");
  }
  ImageBuffer out(image.width, image.height);
  for (size_t i = 0; i < image.data.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    out.data[i] = clamp01(gain[c] * std::pow(image.data[i], gamma[c]) + bias[c]);
  }
  return out;
}

size_t Mask::area() const {
  size_t n = 0;
  for (uint8_t v : in) n += v;
  return n;
}

Mask make_mask(int width, int height, bool fill) {
  Mask m;
  m.width = width;
  m.height = height;
  m.in.assign(static_cast<size_t>(width) * height, fill ? 1 : 0);
  return m;
}

Mask load_mask(const std::string& path) {
  const ImageBuffer img = load_image(path);
  Mask m = make_mask(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) m.set(x, y, img.at(x, y, 0) >= 0.5);
  return m;
}

void save_mask(const Mask& mask, const std::string& path) {
  ImageBuffer img(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      const double v = mask.at(x, y) ? 1.0 : 0.0;
      img.set_pixel(x, y, Rgb(v, v, v));
    }
  save_image(img, path);
}

}  // namespace nerfcc
