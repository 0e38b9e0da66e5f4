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

#include "kcross/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kcross/errors.hpp"

namespace kcross {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid_input";
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kState: return "state";
    case ErrorKind::kData: return "data";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kInsufficientData: return "insufficient_data";
    case ErrorKind::kSpec: return "spec";
    case ErrorKind::kSegmentation: return "segmentation";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

std::string ShapeString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t ShapeNumel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) Fail(ErrorKind::kShape, "negative dimension in " + ShapeString(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(ShapeNumel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != ShapeNumel(shape_)) {
    Fail(ErrorKind::kShape, "data size " + std::to_string(data_.size()) +
                                " does not match shape " + ShapeString(shape_));
  }
}

Tensor Tensor::Randn(const Shape& shape, std::mt19937_64& rng, double stddev) {
  Tensor t(shape);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data_) v = dist(rng);
  return t;
}

Tensor Tensor::Uniform(const Shape& shape, std::mt19937_64& rng, double lo,
                       double hi) {
  Tensor t(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data_) v = dist(rng);
  return t;
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (ShapeNumel(shape) != data_.size()) {
    Fail(ErrorKind::kShape, "cannot reshape " + ShapeString(shape_) + " to " +
                                ShapeString(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::Fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double Tensor::Sum() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::uint64_t Tensor::Checksum() const {
  std::uint64_t h = Fnv1a(shape_.data(), shape_.size() * sizeof(int));
  return Fnv1a(data_.data(), data_.size() * sizeof(double), h);
}

std::uint64_t Fnv1a(const void* bytes, std::size_t count, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < count; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

Tensor StackImages(std::span<const Image> images) {
  if (images.empty()) Fail(ErrorKind::kInvalidArgument, "no images to stack");
  const int h = images[0].rows;
  const int w = images[0].cols;
  Tensor t({static_cast<int>(images.size()), 1, h, w});
  std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].rows != h || images[i].cols != w) {
      Fail(ErrorKind::kShape, "images in a batch must share a shape");
    }
    std::copy(images[i].pixels.begin(), images[i].pixels.end(),
              t.data() + i * plane);
  }
  return t;
}

Image TensorPlane(const Tensor& t, int n, int c) {
  if (t.rank() != 4) Fail(ErrorKind::kShape, "expected rank-4 tensor");
  Image img(t.dim(2), t.dim(3));
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) img(y, x) = t.at(n, c, y, x);
  return img;
}

}  // namespace kcross
