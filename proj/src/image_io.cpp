// Copyright 2026 The K-CROSS Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "kcross/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "kcross/errors.hpp"

namespace kcross {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void WriteToVector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void NoFlush(png_structp) {}

[[noreturn]] void PngError(png_structp, png_const_charp msg) {
  throw Error(ErrorKind::kIo, std::string("png: ") + msg);
}

void PngWarning(png_structp, png_const_charp) {}

// Writes rows of `bit_depth` grayscale to either a file or a buffer.
void WritePng(std::FILE* file, std::vector<std::uint8_t>* buffer, int rows,
              int cols, int bit_depth, const std::vector<std::uint8_t>& raw) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, PngError, PngWarning);
  if (!png) Fail(ErrorKind::kIo, "png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  try {
    if (file) {
      png_init_io(png, file);
    } else {
      png_set_write_fn(png, buffer, WriteToVector, NoFlush);
    }
    png_set_IHDR(png, info, cols, rows, bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(cols) * (bit_depth / 8);
    for (int r = 0; r < rows; ++r) {
      png_write_row(png, const_cast<png_bytep>(raw.data() + r * stride));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

struct Decoded {
  int rows = 0;
  int cols = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> raw;
};

Decoded ReadPng(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) Fail(ErrorKind::kIo, "cannot open " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    Fail(ErrorKind::kIo, path + " is not a PNG file");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, PngError, PngWarning);
  if (!png) Fail(ErrorKind::kIo, "png: cannot create reader");
  png_infop info = png_create_info_struct(png);
  Decoded d;
  try {
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE) {
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // native little-endian words
    png_read_update_info(png, info);
    d.rows = static_cast<int>(png_get_image_height(png, info));
    d.cols = static_cast<int>(png_get_image_width(png, info));
    depth = png_get_bit_depth(png, info);
    d.bit_depth = depth;
    const std::size_t stride = png_get_rowbytes(png, info);
    if (stride != static_cast<std::size_t>(d.cols) * (depth / 8)) {
      Fail(ErrorKind::kIo, path + ": unsupported PNG layout");
    }
    d.raw.resize(stride * d.rows);
    std::vector<png_bytep> rows(d.rows);
    for (int r = 0; r < d.rows; ++r) rows[r] = d.raw.data() + r * stride;
    png_read_image(png, rows.data());
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

std::vector<std::uint8_t> Pack16(const Image& image) {
  std::vector<std::uint8_t> raw(image.size() * 2);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(image.pixels[i], 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    raw[2 * i] = static_cast<std::uint8_t>(q >> 8);  // PNG is big-endian
    raw[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
  }
  return raw;
}

}  // namespace

void SavePng16(const std::string& path, const Image& image) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) Fail(ErrorKind::kIo, "cannot write " + path);
  WritePng(f.get(), nullptr, image.rows, image.cols, 16, Pack16(image));
}

void SavePng8(const std::string& path, const Gray8& image) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) Fail(ErrorKind::kIo, "cannot write " + path);
  WritePng(f.get(), nullptr, image.rows, image.cols, 8, image.pixels);
}

std::vector<std::uint8_t> EncodePng8(const Gray8& image) {
  std::vector<std::uint8_t> out;
  WritePng(nullptr, &out, image.rows, image.cols, 8, image.pixels);
  return out;
}

Image LoadPng(const std::string& path) {
  const Decoded d = ReadPng(path);
  Image img(d.rows, d.cols);
  if (d.bit_depth == 16) {
    const auto* words = reinterpret_cast<const std::uint16_t*>(d.raw.data());
    for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = words[i] / 65535.0;
  } else {
    for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = d.raw[i] / 255.0;
  }
  return img;
}

Gray8 LoadPng8(const std::string& path) {
  const Decoded d = ReadPng(path);
  if (d.bit_depth != 8) Fail(ErrorKind::kIo, path + " is not an 8-bit PNG");
  return {d.rows, d.cols, d.raw};
}

Gray8 ToGray8(const Image& image, double lo, double hi) {
  Gray8 g{image.rows, image.cols, std::vector<std::uint8_t>(image.size())};
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp((image.pixels[i] - lo) / span, 0.0, 1.0);
    g.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return g;
}

}  // namespace kcross
