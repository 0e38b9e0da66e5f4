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

#ifndef KCROSS_TENSOR_HPP_
#define KCROSS_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace kcross {

using Shape = std::vector<int>;

std::string ShapeString(const Shape& shape);
std::size_t ShapeNumel(const Shape& shape);

// Dense row-major array of doubles. Rank-4 tensors are (batch, channel,
// height, width).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Zeros(const Shape& shape) { return Tensor(shape, 0.0); }
  static Tensor Randn(const Shape& shape, std::mt19937_64& rng,
                      double stddev = 1.0);
  static Tensor Uniform(const Shape& shape, std::mt19937_64& rng, double lo,
                        double hi);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int n, int c, int h, int w) {
    return data_[Offset4(n, c, h, w)];
  }
  double at(int n, int c, int h, int w) const {
    return data_[Offset4(n, c, h, w)];
  }

  Tensor Reshaped(Shape shape) const;
  void Fill(double value);
  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }

  double Sum() const;
  bool AllFinite() const;

  // FNV-1a over the raw bytes; used for freeze and determinism audits.
  std::uint64_t Checksum() const;

 private:
  std::size_t Offset4(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) *
               shape_[3] +
           w;
  }

  Shape shape_;
  std::vector<double> data_;
};

// Real matrix in image space, row-major (rows = M, cols = N).
struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int r, int c, double fill = 0.0)
      : rows(r), cols(c), pixels(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) {
    return pixels[static_cast<std::size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return pixels[static_cast<std::size_t>(r) * cols + c];
  }
  std::size_t size() const { return pixels.size(); }
  bool SameShape(const Image& o) const {
    return rows == o.rows && cols == o.cols;
  }
  bool operator==(const Image& o) const = default;
};

// Packs images as a (B, 1, H, W) tensor.
Tensor StackImages(std::span<const Image> images);
Image TensorPlane(const Tensor& t, int n, int c);

std::uint64_t Fnv1a(const void* bytes, std::size_t count,
                    std::uint64_t seed = 1469598103934665603ULL);

}  // namespace kcross

#endif  // KCROSS_TENSOR_HPP_
