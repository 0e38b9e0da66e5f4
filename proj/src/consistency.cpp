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


#include "kcross/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "kcross/errors.hpp"

namespace kcross::consistency {
namespace {

void RequireSameShape(const Image& x, const Image& y, const char* what) {
  if (!x.SameShape(y)) {
    Fail(ErrorKind::kShape, std::string(what) + ": shapes " + std::to_string(x.rows) +
                                "x" + std::to_string(x.cols) + " vs " +
                                std::to_string(y.rows) + "x" + std::to_string(y.cols));
  }
}

// Separable filter with a truncated Gaussian, normalized by the weight that
// falls inside the image.
class WindowFilter {
 public:
  WindowFilter(int rows, int cols) : rows_(rows), cols_(cols) {
    for (int i = -kRadius; i <= kRadius; ++i)
      taps_[i + kRadius] = std::exp(-0.5 * i * i / (kSigma * kSigma));
    row_norm_ = Pass(std::vector<double>(static_cast<std::size_t>(rows) * cols, 1.0));
  }

  std::vector<double> Apply(const std::vector<double>& v) const {
    std::vector<double> out = Pass(v);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= row_norm_[i];
    return out;
  }

 private:
  static constexpr int kRadius = 5;
  static constexpr double kSigma = 1.5;

  std::vector<double> Pass(const std::vector<double>& v) const {
    std::vector<double> tmp(v.size(), 0.0), out(v.size(), 0.0);
    for (int y = 0; y < rows_; ++y)
      for (int x = 0; x < cols_; ++x) {
        double acc = 0.0;
        for (int i = std::max(-kRadius, -x); i <= std::min(kRadius, cols_ - 1 - x); ++i)
          acc += taps_[i + kRadius] * v[static_cast<std::size_t>(y) * cols_ + x + i];
        tmp[static_cast<std::size_t>(y) * cols_ + x] = acc;
      }
    for (int y = 0; y < rows_; ++y)
      for (int x = 0; x < cols_; ++x) {
        double acc = 0.0;
        for (int i = std::max(-kRadius, -y); i <= std::min(kRadius, rows_ - 1 - y); ++i)
          acc += taps_[i + kRadius] * tmp[static_cast<std::size_t>(y + i) * cols_ + x];
        out[static_cast<std::size_t>(y) * cols_ + x] = acc;
      }
    return out;
  }

  int rows_, cols_;
  double taps_[2 * kRadius + 1];
  std::vector<double> row_norm_;
};

}  // namespace

RankingAlignment Align(const std::vector<double>& ref, const std::vector<double>& syn,
                       Direction direction) {
  if (ref.size() != syn.size()) {
    Fail(ErrorKind::kInvalidArgument, "uniformize: " + std::to_string(ref.size()) +
                                          " reference levels vs " +
                                          std::to_string(syn.size()) + " scores");
  }
  if (ref.empty()) Fail(ErrorKind::kInvalidArgument, "uniformize: empty input");
  for (double s : syn) {
    if (std::isnan(s)) Fail(ErrorKind::kInvalidArgument, "uniformize: NaN score");
  }
  std::map<double, int> counts;
  for (double r : ref) ++counts[r];

  RankingAlignment out;
  int start = 0;
  for (const auto& [level, count] : counts) {
    out.levels.push_back(level);
    out.pairwise.emplace_back(start, start + count);
    start += count;
  }
  std::vector<double> key(syn);
  if (direction == Direction::kLowerIsBetter)
    for (double& k : key) k = -k;
  std::vector<int> order(syn.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return key[a] < key[b]; });

  const double num_levels = static_cast<double>(out.levels.size());
  out.uniform_result.assign(syn.size(), 0.0);
  for (std::size_t i = 0; i < out.pairwise.size(); ++i) {
    for (int rank = out.pairwise[i].first; rank < out.pairwise[i].second; ++rank)
      out.uniform_result[order[rank]] = static_cast<double>(i) / num_levels;
  }
  return out;
}

std::vector<double> Uniformize(const std::vector<double>& ref,
                               const std::vector<double>& syn, Direction direction) {
  return Align(ref, syn, direction).uniform_result;
}

double Inconsistency(const std::vector<double>& ref, const std::vector<double>& aligned) {
  if (ref.size() != aligned.size() || ref.empty()) {
    Fail(ErrorKind::kInvalidArgument, "inconsistency: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) total += std::abs(ref[i] - aligned[i]);
  return total / static_cast<double>(ref.size());
}

double RankInconsistency(const std::vector<double>& ref, const std::vector<double>& syn,
                         Direction direction) {
  return Inconsistency(ref, Uniformize(ref, syn, direction));
}

double Mae(const Image& x, const Image& y) {
  RequireSameShape(x, y, "mae");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(x.pixels[i] - y.pixels[i]);
  return total / static_cast<double>(x.size());
}

double Psnr(const Image& x, const Image& y) {
  RequireSameShape(x, y, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.pixels[i] - y.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double Ssim(const Image& x, const Image& y) {
  RequireSameShape(x, y, "ssim");
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  const WindowFilter filter(x.rows, x.cols);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x.pixels[i] * x.pixels[i];
    yy[i] = y.pixels[i] * y.pixels[i];
    xy[i] = x.pixels[i] * y.pixels[i];
  }
  const auto mx = filter.Apply(x.pixels), my = filter.Apply(y.pixels);
  const auto sxx = filter.Apply(xx), syy = filter.Apply(yy), sxy = filter.Apply(xy);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + kC1) * (2 * cov + kC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
  }
  return total / static_cast<double>(x.size());
}

double BaselineMetric(const Image& x, const Image& x_hat, Baseline kind) {
  switch (kind) {
    case Baseline::kMae: return Mae(x, x_hat);
    case Baseline::kPsnr: return Psnr(x, x_hat);
    case Baseline::kSsim: return Ssim(x, x_hat);
  }
  Fail(ErrorKind::kInvalidArgument, "unknown baseline metric");
}

const std::vector<MetricInfo>& MetricRegistry() {
  static const std::vector<MetricInfo> kRegistry = {
      {"mae", Direction::kLowerIsBetter},
      {"psnr", Direction::kHigherIsBetter},
      {"ssim", Direction::kHigherIsBetter},
      {"kcross", Direction::kHigherIsBetter},
  };
  return kRegistry;
}

const MetricInfo& LookupMetric(const std::string& name) {
  for (const auto& m : MetricRegistry())
    if (m.name == name) return m;
  Fail(ErrorKind::kConfig, "unknown metric '" + name + "'");
}

}  // namespace kcross::consistency
