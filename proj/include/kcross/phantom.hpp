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


#ifndef KCROSS_PHANTOM_HPP_
#define KCROSS_PHANTOM_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kcross/tensor.hpp"

namespace kcross::phantom {

enum class Degradation {
  kGaussianBlur,
  kAdditiveNoise,
  kKspaceMaskout,
  kIntensityShift,
  kTumorTextureCorrupt,
};

inline constexpr Degradation kAllDegradations[] = {
    Degradation::kGaussianBlur, Degradation::kAdditiveNoise,
    Degradation::kKspaceMaskout, Degradation::kIntensityShift,
    Degradation::kTumorTextureCorrupt};

std::string DegradationName(Degradation kind);
Degradation ParseDegradation(const std::string& name);

// Filled ellipse in pixel coordinates; `latent` is the tissue value fed to
// the modality transfer functions.
struct Ellipse {
  double cy = 0, cx = 0;
  double ry = 1, rx = 1;
  double angle = 0;  // radians
  double latent = 0.5;

  bool Contains(double y, double x) const;
  double Area() const;
};

struct Tumor {
  double cy = 0, cx = 0;
  double radius = 5;
  double brightness = 0.95;  // target-modality intensity
};

struct PhantomSpec {
  int size = 64;
  std::vector<Ellipse> structures;  // structures[0] is the head outline
  std::optional<Tumor> tumor;
  Degradation degradation = Degradation::kGaussianBlur;
  double severity = 0.0;
  std::uint64_t seed = 0;

  bool healthy() const { return !tumor.has_value(); }
};

struct PhantomSample {
  Image source;       // s
  Image target;       // t
  Image synthesized;  // t_hat
  Image mask_truth;   // analytic tumor disk as 0/1, all zero when healthy
  double oracle = 0.9;
  PhantomSpec spec;
};

// Source u -> u^2, target u -> 0.7 sqrt(u); both monotone on [0, 1].
double SourceTransfer(double latent);
double TargetTransfer(double latent);

// round(9 (1 - severity)) / 10 on the 10-level grid.
double OracleLevel(double severity);

// Draws anatomy and tumor parameters from `seed`.
PhantomSpec RandomSpec(std::uint64_t seed, Degradation kind, double severity,
                       bool healthy, int size = 64);

PhantomSample Generate(const PhantomSpec& spec);

// Renders one ellipse of `value` on a zero background.
Image RenderEllipse(int size, const Ellipse& e, double value);

// Zeroes exactly round(fraction * M * N) coefficients, highest spatial
// frequency first, keeping conjugate partners together so the result stays
// real. Returns the inverse transform (not clamped).
Image KspaceMaskout(const Image& image, double fraction);

// Suite of `n` specs cycling through `kinds`, with oracle levels spread
// uniformly over the grid.
std::vector<PhantomSpec> MakeSuite(int n, std::uint64_t seed,
                                   const std::vector<Degradation>& kinds,
                                   bool healthy, int size = 64);

}  // namespace kcross::phantom

#endif  // KCROSS_PHANTOM_HPP_
