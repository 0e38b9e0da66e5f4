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

#include "kcross/autograd.hpp"

#include <random>

#include "gtest/gtest.h"
#include "kcross/errors.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace kcross {
namespace {

using ag::Var;
using testing::CheckGradients;
using testing::Project;
using testing::RandomParam;

constexpr double kGradTol = 1e-4;

TEST(Autograd, ElementwiseGradients) {
  std::mt19937_64 rng(1);
  Var a = RandomParam({2, 3, 4, 4}, rng);
  Var b = RandomParam({2, 3, 4, 4}, rng);
  auto f = [](const std::vector<Var>& in) {
    Var t = ag::Add(ag::Mul(in[0], in[1]), ag::Scale(ag::Square(in[0]), 0.5));
    t = ag::Sub(ag::Tanh(t), ag::LeakyRelu(in[1], 0.2));
    t = ag::Add(t, ag::Abs(ag::AddScalar(in[0], 0.1)));
    return Project(t, 7);
  };
  auto r = CheckGradients(f, {a, b});
  EXPECT_LT(r.worst_relative, kGradTol) << r.where;
}

TEST(Autograd, ConvMatchesNaiveOracle) {
  std::mt19937_64 rng(2);
  Var x = RandomParam({2, 3, 7, 6}, rng);
  Var w = RandomParam({4, 3, 3, 3}, rng);
  Var out = ag::Conv2d(x, w, Var(), {2, 1});
  std::vector<double> ref = testing::NaiveRealConv(
      x.value().storage(), 2, 3, 7, 6, w.value().storage(), 4, 3, 3, 2, 1);
  ASSERT_EQ(out.value().numel(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    EXPECT_NEAR(out.value()[i], ref[i], 1e-12);
}

TEST(Autograd, ConvGradients) {
  std::mt19937_64 rng(3);
  Var x = RandomParam({2, 2, 6, 6}, rng);
  Var w = RandomParam({3, 2, 4, 4}, rng, 0.5);
  Var b = RandomParam({3}, rng);
  auto f = [](const std::vector<Var>& in) {
    return Project(ag::Conv2d(in[0], in[1], in[2], {2, 1}), 11);
  };
  auto r = CheckGradients(f, {x, w, b});
  EXPECT_LT(r.worst_relative, kGradTol) << r.where;
}

TEST(Autograd, ConvTransposeGradients) {
  std::mt19937_64 rng(4);
  Var x = RandomParam({2, 3, 4, 4}, rng);
  Var w = RandomParam({3, 2, 4, 4}, rng, 0.5);
  Var b = RandomParam({2}, rng);
  auto f = [](const std::vector<Var>& in) {
    return Project(ag::ConvTranspose2d(in[0], in[1], in[2], {2, 1}), 12);
  };
  auto r = CheckGradients(f, {x, w, b});
  EXPECT_LT(r.worst_relative, kGradTol) << r.where;
}

TEST(Autograd, ConvTransposeIsAdjointOfConv) {
  std::mt19937_64 rng(5);
  Tensor w = Tensor::Randn({3, 2, 4, 4}, rng);
  Tensor x = Tensor::Randn({2, 2, 8, 8}, rng);
  Tensor y = Tensor::Randn({2, 3, 4, 4}, rng);
  Var cx = ag::Conv2d(ag::Constant(x), ag::Constant(w), Var(), {2, 1});
  Var ty = ag::ConvTranspose2d(ag::Constant(y), ag::Constant(w), Var(), {2, 1});
  ASSERT_EQ(ty.shape(), x.shape());
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.numel(); ++i) lhs += cx.value()[i] * y[i];
  for (std::size_t i = 0; i < x.numel(); ++i) rhs += x[i] * ty.value()[i];
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
}

TEST(Autograd, BatchNormTrainingGradients) {
  std::mt19937_64 rng(6);
  Var x = RandomParam({3, 2, 3, 3}, rng);
  Var g = RandomParam({2}, rng);
  Var b = RandomParam({2}, rng);
  auto f = [](const std::vector<Var>& in) {
    ag::BatchNormState st;
    return Project(ag::BatchNorm2d(in[0], in[1], in[2], st, true), 13);
  };
  auto r = CheckGradients(f, {x, g, b});
  EXPECT_LT(r.worst_relative, kGradTol) << r.where;
}

TEST(Autograd, BatchNormEvalGradients) {
  std::mt19937_64 rng(7);
  Var x = RandomParam({1, 2, 3, 3}, rng);
  Var g = RandomParam({2}, rng);
  Var b = RandomParam({2}, rng);
  auto f = [](const std::vector<Var>& in) {
    ag::BatchNormState st;
    st.running_mean = Tensor({2}, std::vector<double>{0.3, -0.2});
    st.running_var = Tensor({2}, std::vector<double>{1.5, 0.7});
    return Project(ag::BatchNorm2d(in[0], in[1], in[2], st, false), 14);
  };
  auto r = CheckGradients(f, {x, g, b});
  EXPECT_LT(r.worst_relative, kGradTol) << r.where;
}

TEST(Autograd, BatchNormRejectsSingletonTrainingBatch) {
  ag::BatchNormState st;
  Var x(Tensor({1, 1, 2, 2}, 1.0));
  Var g(Tensor({1}, 1.0)), b(Tensor({1}, 0.0));
  try {
    ag::BatchNorm2d(x, g, b, st, true);
    FAIL() << "expected configuration error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(Autograd, StructuralOpGradients) {
  std::mt19937_64 rng(8);
  Var x = RandomParam({2, 2, 3, 3}, rng);
  Var y = RandomParam({2, 1, 3, 3}, rng);
  auto f = [](const std::vector<Var>& in) {
    const Var parts[] = {in[0], in[1]};
    Var c = ag::Concat(parts);
    Var u = ag::UpsampleNearest(c, 2);
    Var p = ag::GlobalAvgPool(u);
    Var rows = ag::SliceRows(ag::Reshape(u, {2, 3 * 36}), 1, 2);
    return ag::Add(Project(p, 15), Project(rows, 16));
  };
  auto r = CheckGradients(f, {x, y});
  EXPECT_LT(r.worst_relative, kGradTol) << r.where;
}

TEST(Autograd, LinearGradients) {
  std::mt19937_64 rng(9);
  Var x = RandomParam({4, 5}, rng);
  Var w = RandomParam({3, 5}, rng);
  Var b = RandomParam({3}, rng);
  auto f = [](const std::vector<Var>& in) {
    return Project(ag::Linear(in[0], in[1], in[2]), 17);
  };
  auto r = CheckGradients(f, {x, w, b});
  EXPECT_LT(r.worst_relative, kGradTol) << r.where;
}

TEST(Autograd, LaplacianMatchesStencilAndGradients) {
  std::mt19937_64 rng(10);
  Var x = RandomParam({2, 1, 5, 6}, rng);
  Var lap = ag::LaplacianReplicate(x);
  for (int n = 0; n < 2; ++n) {
    std::vector<double> plane(x.value().data() + n * 30, x.value().data() + (n + 1) * 30);
    std::vector<double> ref = testing::NaiveLaplacian(plane, 5, 6);
    for (int i = 0; i < 30; ++i) EXPECT_NEAR(lap.value()[n * 30 + i], ref[i], 1e-12);
  }
  auto f = [](const std::vector<Var>& in) {
    return Project(ag::LaplacianReplicate(in[0]), 18);
  };
  auto r = CheckGradients(f, {x});
  EXPECT_LT(r.worst_relative, kGradTol) << r.where;
}

TEST(Autograd, NormalizeModulusMmdGradients) {
  std::mt19937_64 rng(11);
  Var x = RandomParam({2, 3, 2, 2}, rng);
  Var re = RandomParam({3, 2}, rng);
  Var im = RandomParam({3, 2}, rng);
  Var a = RandomParam({3, 4}, rng);
  Var b = RandomParam({4, 4}, rng);
  const std::vector<double> sig = {1.0, 4.0}, wts = {0.5, 0.5};
  auto f = [&](const std::vector<Var>& in) {
    Var t1 = Project(ag::ChannelUnitNormalize(in[0]), 19);
    Var t2 = Project(ag::Modulus(in[1], in[2]), 20);
    Var t3 = ag::Mmd2(in[3], in[4], sig, wts);
    const Var terms[] = {t1, t2, t3};
    const double w[] = {1.0, 1.0, 3.0};
    return ag::WeightedSum(terms, w);
  };
  auto r = CheckGradients(f, {x, re, im, a, b});
  EXPECT_LT(r.worst_relative, kGradTol) << r.where;
}

TEST(Autograd, NoGradGuardSkipsGraph) {
  Var p(Tensor({2}, 1.0), true);
  ag::NoGradGuard guard;
  Var q = ag::Scale(p, 2.0);
  EXPECT_FALSE(q.requires_grad());
}

TEST(Autograd, GradientsAccumulateUntilZeroed) {
  Var p(Tensor({1}, 3.0), true);
  ag::Backward(ag::Square(p));
  ag::Backward(ag::Square(p));
  EXPECT_DOUBLE_EQ(p.grad()[0], 12.0);
  p.ZeroGrad();
  EXPECT_DOUBLE_EQ(p.grad()[0], 0.0);
}

TEST(Autograd, StraightThroughPassesGradient) {
  Var p(Tensor({2}, std::vector<double>{1.0, 2.0}), true);
  Var st = ag::StraightThrough(p, Tensor({2}, std::vector<double>{5.0, 7.0}));
  EXPECT_DOUBLE_EQ(st.value()[1], 7.0);
  ag::Backward(ag::Sum(ag::Scale(st, 3.0)));
  EXPECT_DOUBLE_EQ(p.grad()[0], 3.0);
  EXPECT_DOUBLE_EQ(p.grad()[1], 3.0);
}

}  // namespace
}  // namespace kcross
