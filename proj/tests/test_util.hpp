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

// Shared helpers for the unit and acceptance suites.

#ifndef KCROSS_TESTS_TEST_UTIL_HPP_
#define KCROSS_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "kcross/autograd.hpp"

namespace kcross::testing {

struct GradCheckResult {
  double worst_relative = 0.0;
  std::string where;
};

// Compares analytic gradients of `f` with central differences for every
// input that requires grad. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult CheckGradients(
    const std::function<ag::Var(const std::vector<ag::Var>&)>& f,
    std::vector<ag::Var> inputs, double step = 1e-6, double floor = 1e-6) {
  for (auto& v : inputs)
    if (v.requires_grad()) v.ZeroGrad();
  ag::Var out = f(inputs);
  ag::Backward(out);
  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].requires_grad()) continue;
    Tensor analytic = inputs[k].grad();
    Tensor& value = inputs[k].mutable_value();
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double saved = value[i];
      value[i] = saved + step;
      double up, down;
      {
        ag::NoGradGuard guard;
        up = f(inputs).item();
      }
      value[i] = saved - step;
      {
        ag::NoGradGuard guard;
        down = f(inputs).item();
      }
      value[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = analytic[i];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double rel = std::abs(a - numeric) / std::max(scale, floor);
      if (rel > result.worst_relative) {
        result.worst_relative = rel;
        result.where = "input " + std::to_string(k) + " index " +
                       std::to_string(i) + " analytic " + std::to_string(a) +
                       " numeric " + std::to_string(numeric);
      }
    }
  }
  return result;
}

// Reduces a tensor to a scalar through a fixed random projection so every
// output element contributes a distinct weight to the checked gradient.
inline ag::Var Project(const ag::Var& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ag::Sum(ag::Mul(out, ag::Constant(Tensor::Randn(out.shape(), rng))));
}

inline ag::Var RandomParam(const Shape& shape, std::mt19937_64& rng,
                           double stddev = 1.0) {
  return ag::Var(Tensor::Randn(shape, rng, stddev), true);
}

}  // namespace kcross::testing

#endif  // KCROSS_TESTS_TEST_UTIL_HPP_
