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


#ifndef KCROSS_CONSISTENCY_HPP_
#define KCROSS_CONSISTENCY_HPP_

#include <string>
#include <utility>
#include <vector>

#include "kcross/tensor.hpp"

namespace kcross::consistency {

enum class Direction { kHigherIsBetter, kLowerIsBetter };

struct RankingAlignment {
  std::vector<double> levels;                 // sorted distinct reference levels
  std::vector<std::pair<int, int>> pairwise;  // [start, end) rank range per level
  std::vector<double> uniform_result;         // i / L per image, original order
};

// Buckets images by the rank of their score: the k-th lowest-quality image
// receives the level index of the k-th lowest reference rating, scaled by
// 1 / L.
RankingAlignment Align(const std::vector<double>& ref, const std::vector<double>& syn,
                       Direction direction);
std::vector<double> Uniformize(const std::vector<double>& ref,
                               const std::vector<double>& syn, Direction direction);

// Mean absolute difference.
double Inconsistency(const std::vector<double>& ref, const std::vector<double>& aligned);

// Uniformize followed by Inconsistency.
double RankInconsistency(const std::vector<double>& ref, const std::vector<double>& syn,
                         Direction direction);

enum class Baseline { kMae, kPsnr, kSsim };

double Mae(const Image& x, const Image& y);
// Dynamic range 1; identical images give +infinity.
double Psnr(const Image& x, const Image& y);
// 11x11 Gaussian window (sigma 1.5) truncated at the border and
// renormalized, K1 = 0.01, K2 = 0.03, dynamic range 1.
double Ssim(const Image& x, const Image& y);
double BaselineMetric(const Image& x, const Image& x_hat, Baseline kind);

struct MetricInfo {
  std::string name;
  Direction direction;
};

// mae (lower is better), psnr, ssim, kcross (higher is better).
const std::vector<MetricInfo>& MetricRegistry();
const MetricInfo& LookupMetric(const std::string& name);

}  // namespace kcross::consistency

#endif  // KCROSS_CONSISTENCY_HPP_
