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


#include "kcross/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>

#include "kcross/errors.hpp"
#include "kcross/image_io.hpp"

namespace kcross::seg {
namespace {

std::uint64_t HashParams(const std::string& id, std::initializer_list<double> params) {
  std::uint64_t h = Fnv1a(id.data(), id.size());
  for (double p : params) h = Fnv1a(&p, sizeof(p), h);
  return h;
}

LesionMask Threshold(const Image& image, double t) {
  LesionMask m{image.rows, image.cols, std::vector<std::uint8_t>(image.size(), 0)};
  for (std::size_t i = 0; i < image.size(); ++i) m.mask[i] = image.pixels[i] > t;
  return m;
}

}  // namespace

double LesionMask::coverage() const {
  if (mask.empty()) return 0.0;
  std::size_t on = 0;
  for (auto v : mask) on += v != 0;
  return static_cast<double>(on) / static_cast<double>(mask.size());
}

bool LesionMask::empty() const {
  return std::none_of(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; });
}

Image LesionMask::AsImage() const {
  Image img(rows, cols);
  for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] ? 1.0 : 0.0;
  return img;
}

LesionMask Segmenter::Segment(const Image& image) const {
  calls_.fetch_add(1);
  for (double v : image.pixels) {
    if (!std::isfinite(v)) {
      Fail(ErrorKind::kSegmentation, id() + ": image contains non-finite values");
    }
  }
  return DoSegment(image);
}

double OtsuThreshold(const std::vector<double>& values, int bins) {
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi - lo <= 0.0) return lo;
  std::vector<double> hist(bins, 0.0);
  const double width = (hi - lo) / bins;
  for (double v : values) {
    const int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
    hist[b] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int b = 0; b < bins; ++b) sum_all += b * hist[b];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_bin = 0;
  for (int b = 0; b < bins - 1; ++b) {
    w0 += hist[b];
    sum0 += b * hist[b];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  return lo + (best_bin + 1) * width;
}

LesionMask LargestComponent(const LesionMask& in) {
  LesionMask out{in.rows, in.cols, std::vector<std::uint8_t>(in.mask.size(), 0)};
  std::vector<int> label(in.mask.size(), -1);
  int best_label = -1;
  std::size_t best_size = 0;
  int next = 0;
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < in.mask.size(); ++start) {
    if (!in.mask[start] || label[start] >= 0) continue;
    std::size_t size = 0;
    label[start] = next;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      ++size;
      const int y = static_cast<int>(p / in.cols), x = static_cast<int>(p % in.cols);
      const int ny[] = {y - 1, y + 1, y, y};
      const int nx[] = {x, x, x - 1, x + 1};
      for (int k = 0; k < 4; ++k) {
        if (ny[k] < 0 || ny[k] >= in.rows || nx[k] < 0 || nx[k] >= in.cols) continue;
        const std::size_t q = static_cast<std::size_t>(ny[k]) * in.cols + nx[k];
        if (in.mask[q] && label[q] < 0) {
          label[q] = next;
          queue.push_back(q);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
    ++next;
  }
  for (std::size_t i = 0; i < label.size(); ++i) out.mask[i] = label[i] == best_label && best_label >= 0;
  return out;
}

std::uint64_t OtsuBandSegmenter::ParameterChecksum() const {
  return HashParams(id(), {static_cast<double>(bins_), min_band_contrast_});
}

LesionMask OtsuBandSegmenter::DoSegment(const Image& image) const {
  const auto [lo, hi] = std::minmax_element(image.pixels.begin(), image.pixels.end());
  if (*hi - *lo <= 1e-12) return Threshold(image, *hi);
  const double t1 = OtsuThreshold(image.pixels, bins_);
  std::vector<double> band;
  for (double v : image.pixels)
    if (v > t1) band.push_back(v);
  double t2 = t1;
  if (!band.empty()) {
    const auto [blo, bhi] = std::minmax_element(band.begin(), band.end());
    if (*bhi - *blo >= min_band_contrast_ * (*hi - *lo)) t2 = OtsuThreshold(band, bins_);
  }
  return LargestComponent(Threshold(image, t2));
}

std::uint64_t FixedThresholdSegmenter::ParameterChecksum() const {
  return HashParams(id(), {fraction_});
}

LesionMask FixedThresholdSegmenter::DoSegment(const Image& image) const {
  const double hi = *std::max_element(image.pixels.begin(), image.pixels.end());
  if (hi <= 1e-12) return Threshold(image, hi);
  return LargestComponent(Threshold(image, fraction_ * hi));
}

SegmenterRegistry SegmenterRegistry::WithDefaults() {
  SegmenterRegistry r;
  r.Register(std::make_shared<OtsuBandSegmenter>());
  r.Register(std::make_shared<FixedThresholdSegmenter>());
  return r;
}

void SegmenterRegistry::Register(std::shared_ptr<Segmenter> backend) {
  const std::string id = backend->id();
  backends_[id] = std::move(backend);
}

std::shared_ptr<Segmenter> SegmenterRegistry::Get(const std::string& id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) {
    std::string known;
    for (const auto& kv : backends_) known += (known.empty() ? "" : ", ") + kv.first;
    Fail(ErrorKind::kConfig, "unknown segmenter backend '" + id + "' (registered: " +
                                 known + ")");
  }
  return it->second;
}

std::vector<std::string> SegmenterRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& kv : backends_) out.push_back(kv.first);
  return out;
}

Image ExtractLesionPatch(const Image& image, const LesionMask& mask, int out_size) {
  if (mask.rows != image.rows || mask.cols != image.cols) {
    Fail(ErrorKind::kShape, "lesion mask shape differs from the image");
  }
  Image patch(out_size, out_size);
  int y0 = image.rows, y1 = -1, x0 = image.cols, x1 = -1;
  for (int y = 0; y < image.rows; ++y)
    for (int x = 0; x < image.cols; ++x)
      if (mask.mask[static_cast<std::size_t>(y) * image.cols + x]) {
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
      }
  if (y1 < 0) return patch;
  const int h = y1 - y0 + 1, w = x1 - x0 + 1;
  auto masked = [&](int y, int x) {
    y = std::clamp(y, 0, h - 1);
    x = std::clamp(x, 0, w - 1);
    const std::size_t i = static_cast<std::size_t>(y + y0) * image.cols + (x + x0);
    return mask.mask[i] ? image.pixels[i] : 0.0;
  };
  for (int py = 0; py < out_size; ++py)
    for (int px = 0; px < out_size; ++px) {
      const double sy = std::max(0.0, (py + 0.5) * h / out_size - 0.5);
      const double sx = std::max(0.0, (px + 0.5) * w / out_size - 0.5);
      const int iy = static_cast<int>(sy), ix = static_cast<int>(sx);
      const double fy = sy - iy, fx = sx - ix;
      patch(py, px) = (1 - fy) * ((1 - fx) * masked(iy, ix) + fx * masked(iy, ix + 1)) +
                      fy * ((1 - fx) * masked(iy + 1, ix) + fx * masked(iy + 1, ix + 1));
    }
  return patch;
}

void SaveMaskPng(const std::string& path, const LesionMask& mask) {
  Gray8 g{mask.rows, mask.cols, std::vector<std::uint8_t>(mask.mask.size())};
  for (std::size_t i = 0; i < mask.mask.size(); ++i) g.pixels[i] = mask.mask[i] ? 255 : 0;
  SavePng8(path, g);
}

LesionMask LoadMaskPng(const std::string& path) {
  const Gray8 g = LoadPng8(path);
  LesionMask m{g.rows, g.cols, std::vector<std::uint8_t>(g.pixels.size())};
  for (std::size_t i = 0; i < g.pixels.size(); ++i) m.mask[i] = g.pixels[i] >= 128;
  return m;
}

}  // namespace kcross::seg
