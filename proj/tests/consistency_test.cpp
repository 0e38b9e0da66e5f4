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


#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "gtest/gtest.h"
#include "kcross/consistency.hpp"
#include "kcross/errors.hpp"
#include "oracles.hpp"

namespace kcross::consistency {
namespace {

std::vector<double> RandomLevels(int n, std::mt19937_64& rng, int max_level = 9) {
  std::uniform_int_distribution<int> d(0, max_level);
  std::vector<double> out(n);
  for (auto& v : out) v = d(rng) / 10.0;
  return out;
}

bool BitEqual(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(UniformizeTest, ThreeLevelsInOrder) {
  const auto a = Uniformize({0.0, 0.1, 0.2}, {1.0, 2.0, 3.0}, Direction::kHigherIsBetter);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_DOUBLE_EQ(a[0], 0.0);
  EXPECT_DOUBLE_EQ(a[1], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(a[2], 2.0 / 3.0);
}

TEST(UniformizeTest, SingleLevelGivesZeros) {
  for (double v : Uniformize({0.4, 0.4, 0.4, 0.4}, {3, -1, 7, 2}, Direction::kHigherIsBetter)) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(UniformizeTest, UnevenBuckets) {
  const auto a = Uniformize({0.0, 0.0, 0.9}, {5, 1, 9}, Direction::kHigherIsBetter);
  EXPECT_EQ(a, (std::vector<double>{0.0, 0.0, 0.5}));
}

TEST(UniformizeTest, AlignmentRecordsBuckets) {
  const auto r = Align({0.9, 0.0, 0.0, 0.3}, {4, 1, 2, 3}, Direction::kHigherIsBetter);
  EXPECT_EQ(r.levels, (std::vector<double>{0.0, 0.3, 0.9}));
  ASSERT_EQ(r.pairwise.size(), 3u);
  EXPECT_EQ(r.pairwise[0], std::make_pair(0, 2));
  EXPECT_EQ(r.pairwise[1], std::make_pair(2, 3));
  EXPECT_EQ(r.pairwise[2], std::make_pair(3, 4));
}

TEST(UniformizeTest, LowerIsBetterIsNegated) {
  const std::vector<double> ref = {0.0, 0.5, 0.9};
  EXPECT_EQ(Uniformize(ref, {3.0, 2.0, 1.0}, Direction::kLowerIsBetter),
            Uniformize(ref, {-3.0, -2.0, -1.0}, Direction::kHigherIsBetter));
}

TEST(UniformizeTest, MatchesLiteralTranscription) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 60);
    const auto ref = RandomLevels(n, rng);
    std::vector<double> syn(n);
    for (auto& s : syn) s = g(rng);
    if (trial % 4 == 0) {
      for (auto& s : syn) s = std::round(s);  // ties
    }
    const auto ours = Uniformize(ref, syn, Direction::kHigherIsBetter);
    const auto lit = testing::LiteralUniformize(ref, syn);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(ours[i], lit[i], 1e-12);
    EXPECT_NEAR(Inconsistency(ref, ours), testing::LiteralInconsistency(ref, lit), 1e-12);
  }
}

TEST(UniformizeTest, StrictlyMonotoneTransformInvariance) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 40);
    const auto ref = RandomLevels(n, rng);
    std::vector<double> syn(n), ex(n), aff(n), neg(n);
    for (int i = 0; i < n; ++i) {
      syn[i] = g(rng);
      ex[i] = std::exp(syn[i]);
      aff[i] = 3.5 * syn[i] - 11.0;
      neg[i] = -2.0 * syn[i];
    }
    const auto base = Uniformize(ref, syn, Direction::kHigherIsBetter);
    EXPECT_TRUE(BitEqual(base, Uniformize(ref, ex, Direction::kHigherIsBetter)));
    EXPECT_TRUE(BitEqual(base, Uniformize(ref, aff, Direction::kHigherIsBetter)));
    EXPECT_TRUE(BitEqual(base, Uniformize(ref, neg, Direction::kLowerIsBetter)));
  }
}

TEST(InconsistencyTest, ReversedTwoLevels) {
  const std::vector<double> ref = {0.0, 0.9};
  const auto a = Uniformize(ref, {1.0, 0.0}, Direction::kHigherIsBetter);
  EXPECT_EQ(a, (std::vector<double>{0.5, 0.0}));
  EXPECT_DOUBLE_EQ(Inconsistency(ref, a), 0.7);
}

TEST(InconsistencyTest, PerfectRankingOnFullGridIsZero) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> ref;
    for (int k = 0; k < 10; ++k)
      for (int c = 0; c < 1 + static_cast<int>(rng() % 4); ++c) ref.push_back(k / 10.0);
    std::shuffle(ref.begin(), ref.end(), rng);
    std::vector<double> syn(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) syn[i] = 5.0 * ref[i] + 0.01 * (rng() % 7);
    EXPECT_NEAR(RankInconsistency(ref, syn, Direction::kHigherIsBetter), 0.0, 1e-15);
  }
}

TEST(InconsistencyTest, BoundedByMaxLevel) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    const auto ref = RandomLevels(30, rng);
    std::vector<double> syn(30);
    for (auto& s : syn) s = g(rng);
    const double v = RankInconsistency(ref, syn, Direction::kHigherIsBetter);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 0.9);
  }
}

TEST(UniformizeTest, Errors) {
  EXPECT_THROW(Uniformize({0.1, 0.2}, {1.0}, Direction::kHigherIsBetter), Error);
  try {
    Uniformize({0.1, 0.2}, {1.0}, Direction::kHigherIsBetter);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
  EXPECT_THROW(Uniformize({0.1}, {std::nan("")}, Direction::kHigherIsBetter), Error);
}

Image Random(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image im(h, w);
  for (auto& p : im.pixels) p = u(rng);
  return im;
}

TEST(BaselineTest, IdenticalImages) {
  std::mt19937_64 rng(1);
  const Image a = Random(16, 16, rng);
  EXPECT_EQ(Mae(a, a), 0.0);
  EXPECT_NEAR(Ssim(a, a), 1.0, 1e-12);
  EXPECT_EQ(Psnr(a, a), std::numeric_limits<double>::infinity());
}

TEST(BaselineTest, ConstantOffset) {
  const Image zero(8, 8, 0.0), half(8, 8, 0.5);
  EXPECT_DOUBLE_EQ(Mae(zero, half), 0.5);
  EXPECT_NEAR(Psnr(zero, half), 10.0 * std::log10(4.0), 1e-12);
  EXPECT_NEAR(Psnr(zero, half), 6.0206, 1e-4);
}

TEST(BaselineTest, SsimMatchesWindowedOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Image a = Random(20, 17, rng), b = Random(20, 17, rng);
    Image c = a;
    for (auto& p : c.pixels) p = std::clamp(p + 0.1 * std::sin(p * 40.0), 0.0, 1.0);
    EXPECT_NEAR(Ssim(a, b), testing::NaiveSsim(a, b), 1e-6);
    EXPECT_NEAR(Ssim(a, c), testing::NaiveSsim(a, c), 1e-6);
  }
}

TEST(BaselineTest, ShapeMismatch) {
  const Image a(4, 4), b(4, 5);
  EXPECT_THROW(Mae(a, b), Error);
  EXPECT_THROW(Psnr(a, b), Error);
  EXPECT_THROW(Ssim(a, b), Error);
}

TEST(MetricRegistryTest, Directions) {
  EXPECT_EQ(LookupMetric("mae").direction, Direction::kLowerIsBetter);
  EXPECT_EQ(LookupMetric("psnr").direction, Direction::kHigherIsBetter);
  EXPECT_EQ(LookupMetric("ssim").direction, Direction::kHigherIsBetter);
  EXPECT_EQ(LookupMetric("kcross").direction, Direction::kHigherIsBetter);
  EXPECT_EQ(MetricRegistry().size(), 4u);
  try {
    LookupMetric("lpips");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

}  // namespace
}  // namespace kcross::consistency
