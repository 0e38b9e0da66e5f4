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


#ifndef KCROSS_IMAGE_IO_HPP_
#define KCROSS_IMAGE_IO_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "kcross/tensor.hpp"

namespace kcross {

// 8-bit grayscale raster.
struct Gray8 {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;
};

// Intensities are clamped to [0, 1] and quantized to 16 bits.
void SavePng16(const std::string& path, const Image& image);
void SavePng8(const std::string& path, const Gray8& image);

std::vector<std::uint8_t> EncodePng8(const Gray8& image);

// Reads an 8- or 16-bit grayscale PNG and rescales to [0, 1].
Image LoadPng(const std::string& path);
Gray8 LoadPng8(const std::string& path);

// Clamps to [lo, hi] and maps linearly onto 0..255.
Gray8 ToGray8(const Image& image, double lo = 0.0, double hi = 1.0);

}  // namespace kcross

#endif  // KCROSS_IMAGE_IO_HPP_
