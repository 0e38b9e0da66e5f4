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


#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "gtest/gtest.h"
#include "json.hpp"
#include "kcross/errors.hpp"
#include "kcross/losses.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace kcross::losses {
namespace {

using cnn::ComplexTensor;

ComplexTensor RandomComplex(const Shape& shape, std::mt19937_64& rng, bool grad = false) {
  return ComplexTensor(ag::Var(Tensor::Randn(shape, rng), grad),
                       ag::Var(Tensor::Randn(shape, rng), grad));
}

Tensor RandomImages(int n, int h, int w, std::mt19937_64& rng) {
  Tensor t({n, 1, h, w});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = u(rng);
  return t;
}

TEST(FrequencyLossTest, ZeroOnIdentical) {
  std::mt19937_64 rng(1);
  std::vector<ComplexTensor> a = {RandomComplex({2, 3, 4, 4}, rng),
                                  RandomComplex({2, 5, 2, 2}, rng)};
  EXPECT_EQ(FrequencyLoss(a, a).item(), 0.0);
}

TEST(FrequencyLossTest, SinglePixelUnitPhasors) {
  std::vector<ComplexTensor> r = {ComplexTensor::Constant(Tensor({1, 1, 1, 1}, {1.0}),
                                                          Tensor({1, 1, 1, 1}, {0.0}))};
  std::vector<ComplexTensor> f = {ComplexTensor::Constant(Tensor({1, 1, 1, 1}, {0.0}),
                                                          Tensor({1, 1, 1, 1}, {1.0}))};
  EXPECT_DOUBLE_EQ(FrequencyLoss(r, f).item(), 2.0);
}

TEST(FrequencyLossTest, MatchesElementwiseOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<ComplexTensor> r, f;
    const Shape shapes[] = {{1, 2, 8, 8}, {1, 4, 4, 4}, {1, 8, 2, 2}};
    for (const auto& s : shapes) {
      r.push_back(RandomComplex(s, rng));
      f.push_back(RandomComplex(s, rng));
    }
    double expected = 0.0, expected_spatial = 0.0;
    for (std::size_t l = 0; l < r.size(); ++l) {
      const auto& ar = r[l].re.value();
      const auto& br = r[l].im.value();
      const auto& af = f[l].re.value();
      const auto& bf = f[l].im.value();
      double acc = 0.0;
      for (std::size_t i = 0; i < ar.numel(); ++i) {
        acc += (ar[i] - af[i]) * (ar[i] - af[i]) + (br[i] - bf[i]) * (br[i] - bf[i]);
      }
      const int c = r[l].shape()[1];
      const double hw = static_cast<double>(ar.numel()) / c;
      expected += acc / (hw * c);
      expected_spatial += acc / hw;
    }
    EXPECT_NEAR(FrequencyLoss(r, f).item(), expected, 1e-8);
    EXPECT_NEAR(FrequencyLoss(r, f, FrequencyReduction::kSpatialMean).item(),
                expected_spatial, 1e-8);
  }
}

TEST(FrequencyLossTest, InvariantToSharedSpatialPermutation) {
  std::mt19937_64 rng(3);
  const Shape s{1, 2, 4, 4};
  auto r = RandomComplex(s, rng), f = RandomComplex(s, rng);
  std::vector<int> perm(16);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto permute = [&](const Tensor& t) {
    Tensor out(t.shape());
    for (int c = 0; c < 2; ++c)
      for (int p = 0; p < 16; ++p) out[c * 16 + p] = t[c * 16 + perm[p]];
    return out;
  };
  auto rp = ComplexTensor::Constant(permute(r.re.value()), permute(r.im.value()));
  auto fp = ComplexTensor::Constant(permute(f.re.value()), permute(f.im.value()));
  EXPECT_NEAR(FrequencyLoss({r}, {f}).item(), FrequencyLoss({rp}, {fp}).item(), 1e-12);
}

TEST(FrequencyLossTest, ShapeErrors) {
  std::mt19937_64 rng(4);
  auto a = RandomComplex({1, 1, 4, 4}, rng), b = RandomComplex({1, 1, 2, 2}, rng);
  try {
    FrequencyLoss({a}, {b});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
  try {
    FrequencyLoss({a, a}, {a});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(FrequencyLossTest, Gradient) {
  std::mt19937_64 rng(5);
  auto r = RandomComplex({1, 1, 16, 16}, rng);
  auto f = RandomComplex({1, 1, 16, 16}, rng, true);
  auto res = testing::CheckGradients(
      [&](const std::vector<ag::Var>& in) {
        return FrequencyLoss({r}, {ComplexTensor(in[0], in[1])});
      },
      {f.re, f.im});
  EXPECT_LT(res.worst_relative, 1e-4) << res.where;
}

TEST(SimilarityLossTest, ZeroOnIdenticalSets) {
  std::mt19937_64 rng(6);
  const Tensor x = Tensor::Randn({6, 4}, rng);
  Tensor y(x.shape());
  const int order[] = {3, 0, 5, 1, 4, 2};
  for (int i = 0; i < 6; ++i)
    for (int d = 0; d < 4; ++d) y[i * 4 + d] = x[order[i] * 4 + d];
  EXPECT_NEAR(SimilarityLoss(ag::Constant(x), ag::Constant(y), {}).item(), 0.0, 1e-9);
}

TEST(SimilarityLossTest, ConstantBatchClosedForm) {
  std::mt19937_64 rng(7);
  MmdKernelBank bank{{1.0}, {1.0}};
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = Tensor::Randn({1, 5}, rng), y = Tensor::Randn({1, 5}, rng);
    Tensor xs({2, 5}), ys({2, 5});
    double d2 = 0.0;
    for (int d = 0; d < 5; ++d) {
      xs[d] = xs[5 + d] = x[d];
      ys[d] = ys[5 + d] = y[d];
      d2 += (x[d] - y[d]) * (x[d] - y[d]);
    }
    EXPECT_NEAR(SimilarityLoss(ag::Constant(xs), ag::Constant(ys), bank).item(),
                2.0 - 2.0 * std::exp(-d2 / 2.0), 1e-9);
  }
}

TEST(SimilarityLossTest, NondecreasingInMeanShift) {
  const double shifts[] = {0.0, 1.0, 2.0, 4.0};
  double previous = -1.0;
  for (double mu : shifts) {
    double total = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(100 + seed);
      Tensor a = Tensor::Randn({16, 4}, rng), b = Tensor::Randn({16, 4}, rng);
      for (int i = 0; i < 16; ++i) b[i * 4] += mu;
      total += SimilarityLoss(ag::Constant(a), ag::Constant(b), {}).item();
    }
    EXPECT_GE(total / 20.0, previous) << "shift " << mu;
    previous = total / 20.0;
  }
}

TEST(SimilarityLossTest, SymmetricAndNonnegative) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    auto a = ag::Constant(Tensor::Randn({5, 3}, rng));
    auto b = ag::Constant(Tensor::Randn({7, 3}, rng));
    const double ab = SimilarityLoss(a, b, {}).item();
    EXPECT_NEAR(ab, SimilarityLoss(b, a, {}).item(), 1e-12);
    EXPECT_GE(ab, -1e-9);
  }
}

TEST(SimilarityLossTest, RejectsEmptyBatch) {
  auto a = ag::Constant(Tensor({0, 3}));
  auto b = ag::Constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  try {
    SimilarityLoss(a, b, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
}

TEST(SimilarityLossTest, Gradient) {
  std::mt19937_64 rng(9);
  auto a = testing::RandomParam({4, 3}, rng);
  auto b = testing::RandomParam({5, 3}, rng);
  auto res = testing::CheckGradients(
      [](const std::vector<ag::Var>& in) { return SimilarityLoss(in[0], in[1], {}); }, {a, b});
  EXPECT_LT(res.worst_relative, 1e-4) << res.where;
}

TEST(MmdKernelBankTest, Validation) {
  EXPECT_THROW((MmdKernelBank{{1.0, 2.0}, {1.0}}.Validate()), Error);
  EXPECT_THROW((MmdKernelBank{{-1.0}, {1.0}}.Validate()), Error);
  const auto w = MmdKernelBank{{1.0, 2.0}, {1.0, 3.0}}.NormalizedWeights();
  EXPECT_DOUBLE_EQ(w[0] + w[1], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 0.75);
}

TEST(TumorLossTest, ZeroOnIdentical) {
  std::mt19937_64 rng(10);
  const LpipsBackbone backbone;
  auto x = ag::Constant(RandomImages(2, 16, 16, rng));
  EXPECT_EQ(TumorLoss(x, x, {}, &backbone).item(), 0.0);
  EXPECT_EQ(LpipsLoss(x, x, backbone).item(), 0.0);
  EXPECT_EQ(LaplacianLoss(x, x).item(), 0.0);
}

TEST(TumorLossTest, RampPlusConstantVanishesWithoutPerceptualTerm) {
  Tensor ramp({1, 1, 16, 16}), shifted({1, 1, 16, 16});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      ramp[y * 16 + x] = 0.02 * x + 0.01 * y;
      shifted[y * 16 + x] = ramp[y * 16 + x] + 0.3;
    }
  LossWeights w;
  w.lpips = 0.0;
  const LpipsBackbone backbone;
  EXPECT_NEAR(TumorLoss(ag::Constant(ramp), ag::Constant(shifted), w, &backbone).item(), 0.0,
              1e-12);
}

TEST(TumorLossTest, LaplacianMatchesConvolutionOracle) {
  std::mt19937_64 rng(11);
  LossWeights w;
  w.lpips = 0.0;
  const LpipsBackbone backbone;
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor a = RandomImages(2, 16, 12, rng), b = RandomImages(2, 16, 12, rng);
    double acc = 0.0;
    for (int n = 0; n < 2; ++n) {
      std::vector<double> pa(a.data() + n * 192, a.data() + (n + 1) * 192);
      std::vector<double> pb(b.data() + n * 192, b.data() + (n + 1) * 192);
      const auto la = testing::NaiveLaplacian(pa, 16, 12);
      const auto lb = testing::NaiveLaplacian(pb, 16, 12);
      for (std::size_t i = 0; i < la.size(); ++i) acc += (la[i] - lb[i]) * (la[i] - lb[i]);
    }
    EXPECT_NEAR(TumorLoss(ag::Constant(a), ag::Constant(b), w, &backbone).item(), acc / 384.0,
                1e-8);
  }
}

TEST(TumorLossTest, MissingBackboneIsConfigError) {
  auto x = ag::Constant(Tensor({1, 1, 4, 4}));
  try {
    TumorLoss(x, x, {}, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(TumorLossTest, BackboneIsFrozenAndSeeded) {
  const LpipsBackbone a, b, c(0x1234);
  EXPECT_EQ(a.Checksum(), b.Checksum());
  EXPECT_NE(a.Checksum(), c.Checksum());
  EXPECT_EQ(a.layers(), 4);
  std::mt19937_64 rng(12);
  auto x = ag::Var(RandomImages(1, 16, 16, rng), true);
  auto y = ag::Constant(RandomImages(1, 16, 16, rng));
  ag::Backward(LpipsLoss(x, y, a));
  EXPECT_EQ(a.Checksum(), b.Checksum());
}

TEST(TumorLossTest, Gradient) {
  std::mt19937_64 rng(13);
  const LpipsBackbone backbone;
  auto x = ag::Constant(RandomImages(1, 16, 16, rng));
  auto y = ag::Var(RandomImages(1, 16, 16, rng), true);
  auto res = testing::CheckGradients(
      [&](const std::vector<ag::Var>& in) { return TumorLoss(x, in[0], {}, &backbone); }, {y});
  EXPECT_LT(res.worst_relative, 1e-4) << res.where;
}

TEST(StructureLossTest, ZeroAndValueAndGradient) {
  std::mt19937_64 rng(14);
  auto x = ag::Constant(RandomImages(2, 16, 16, rng));
  EXPECT_EQ(StructureLoss(x, x).item(), 0.0);
  auto a = ag::Constant(Tensor({1, 1, 1, 2}, {0.0, 1.0}));
  auto b = ag::Constant(Tensor({1, 1, 1, 2}, {0.5, 0.0}));
  EXPECT_DOUBLE_EQ(StructureLoss(a, b).item(), 0.75);
  auto y = ag::Var(RandomImages(1, 16, 16, rng), true);
  auto res = testing::CheckGradients(
      [&](const std::vector<ag::Var>& in) {
        return StructureLoss(ag::SliceRows(x, 0, 1), in[0]);
      },
      {y});
  EXPECT_LT(res.worst_relative, 1e-4) << res.where;
}

TEST(InconsistencyLossTest, Examples) {
  auto s = [](std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return ag::Constant(Tensor({n, 1}, std::move(v)));
  };
  EXPECT_NEAR(InconsistencyLoss(s({0.7}), s({0.4})).item(), 0.3, 1e-15);
  EXPECT_NEAR(InconsistencyLoss(s({0.1, 0.5}), s({0.0, 0.9})).item(), 0.25, 1e-15);
  EXPECT_EQ(InconsistencyLoss(s({0.3, 0.6}), s({0.3, 0.6})).item(), 0.0);
  EXPECT_NEAR(InconsistencyLoss(s({0.1, 0.5}), s({0.0, 0.9}), InconsistencyNorm::kMse).item(),
              (0.01 + 0.16) / 2, 1e-15);
}

TEST(InconsistencyLossTest, RejectsOutOfScale) {
  auto a = ag::Constant(Tensor({1, 1}, {1.5}));
  auto b = ag::Constant(Tensor({1, 1}, {0.5}));
  try {
    InconsistencyLoss(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
}

TEST(InconsistencyLossTest, Gradient) {
  auto a = ag::Var(Tensor({3, 1}, {0.2, 0.55, 0.81}), true);
  auto b = ag::Constant(Tensor({3, 1}, {0.1, 0.6, 0.3}));
  auto res = testing::CheckGradients(
      [&](const std::vector<ag::Var>& in) { return InconsistencyLoss(in[0], b); }, {a});
  EXPECT_LT(res.worst_relative, 1e-4) << res.where;
}

TEST(TotalsTest, WeightedSums) {
  auto c = [](double v) { return ag::Constant(Tensor({1}, {v})); };
  EXPECT_EQ(Stage1Total({c(0), c(0), c(0), c(0)}, {}).item(), 0.0);
  EXPECT_NEAR(Stage1Total({c(0.1), c(0.2), c(0.3), c(0.4)}, {}).item(), 1.0, 1e-15);
  LossWeights w;
  w.tumor = 2.0;
  w.structure = w.frequency = w.similarity = 0.0;
  EXPECT_DOUBLE_EQ(Stage1Total({c(0.5), c(7), c(7), c(7)}, w).item(), 1.0);
  EXPECT_DOUBLE_EQ(Stage2Total(c(0.25)).item(), 0.25);
}

TEST(LossWeightsTest, RejectsNegative) {
  LossWeights w;
  w.lpips = -1.0;
  EXPECT_THROW(w.Validate(), Error);
}

TEST(LossLogTest, WritesJsonLines) {
  const auto path = std::filesystem::temp_directory_path() / "kcross_losslog_test.jsonl";
  std::filesystem::remove(path);
  {
    LossLog log(path.string());
    log.Record(1, "frequency", 0.5);
    log.Record(2, "tumor", 0.25);
  }
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.at("step"), 1);
  EXPECT_EQ(j.at("loss_name"), "frequency");
  EXPECT_DOUBLE_EQ(j.at("value").get<double>(), 0.5);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace kcross::losses
