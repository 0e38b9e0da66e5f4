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


#ifndef KCROSS_SEGMENTATION_HPP_
#define KCROSS_SEGMENTATION_HPP_

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kcross/tensor.hpp"

namespace kcross::seg {

struct LesionMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> mask;  // 0 or 1

  double coverage() const;
  bool empty() const;
  Image AsImage() const;
  bool operator==(const LesionMask& o) const = default;
};

// Frozen segmenter. Backends implement DoSegment; Segment validates input
// and counts invocations.
class Segmenter {
 public:
  virtual ~Segmenter() = default;

  LesionMask Segment(const Image& image) const;
  long calls() const { return calls_.load(); }
  void ResetCalls() { calls_ = 0; }

  virtual std::string id() const = 0;
  // Digest of every parameter the backend reads; constant by construction.
  virtual std::uint64_t ParameterChecksum() const = 0;

 protected:
  virtual LesionMask DoSegment(const Image& image) const = 0;

 private:
  mutable std::atomic<long> calls_{0};
};

// Otsu threshold over all pixels, a second Otsu restricted to the
// above-threshold band, then the largest 4-connected component.
class OtsuBandSegmenter : public Segmenter {
 public:
  explicit OtsuBandSegmenter(int bins = 256, double min_band_contrast = 0.1)
      : bins_(bins), min_band_contrast_(min_band_contrast) {}
  std::string id() const override { return "otsu_band"; }
  std::uint64_t ParameterChecksum() const override;

 protected:
  LesionMask DoSegment(const Image& image) const override;

 private:
  int bins_;
  double min_band_contrast_;
};

// Pixels above a fixed fraction of the image maximum, largest component.
class FixedThresholdSegmenter : public Segmenter {
 public:
  explicit FixedThresholdSegmenter(double fraction = 0.8) : fraction_(fraction) {}
  std::string id() const override { return "fixed_threshold"; }
  std::uint64_t ParameterChecksum() const override;

 protected:
  LesionMask DoSegment(const Image& image) const override;

 private:
  double fraction_;
};

class SegmenterRegistry {
 public:
  // Registry holding the built-in backends.
  static SegmenterRegistry WithDefaults();

  void Register(std::shared_ptr<Segmenter> backend);
  // Throws kConfig for unknown ids.
  std::shared_ptr<Segmenter> Get(const std::string& id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::shared_ptr<Segmenter>> backends_;
};

// Otsu threshold of `values` using `bins` histogram bins over their range.
double OtsuThreshold(const std::vector<double>& values, int bins);

// Keeps the largest 4-connected component (first in raster order on ties).
LesionMask LargestComponent(const LesionMask& mask);

// Multiplies by the mask, crops to its bounding box and bilinearly resizes
// to out_size x out_size. Empty masks give an all-zero patch.
Image ExtractLesionPatch(const Image& image, const LesionMask& mask, int out_size = 64);

void SaveMaskPng(const std::string& path, const LesionMask& mask);
LesionMask LoadMaskPng(const std::string& path);

}  // namespace kcross::seg

#endif  // KCROSS_SEGMENTATION_HPP_
