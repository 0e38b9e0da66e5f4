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

// Minimal reverse-mode automatic differentiation over dense double tensors.
//
// A Var is a handle to a graph node. Operations on Vars record their inputs
// and a closure that maps the output gradient to input gradients. Backward()
// walks the graph in reverse topological order. Leaves created with
// requires_grad = true (parameters) accumulate gradients across calls until
// ZeroGrad().

#ifndef KCROSS_AUTOGRAD_HPP_
#define KCROSS_AUTOGRAD_HPP_

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "kcross/tensor.hpp"

namespace kcross::ag {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor& EnsureGrad();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->EnsureGrad(); }
  Tensor& mutable_grad() { return node_->EnsureGrad(); }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }
  double item() const;

  void ZeroGrad();

  static Var FromNode(std::shared_ptr<Node> node) {
    Var v;
    v.node_ = std::move(node);
    return v;
  }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool GradEnabled();

void Backward(const Var& root);

Var Constant(Tensor value);
Var Detach(const Var& x);

// Elementwise.
Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, double factor);
Var AddScalar(const Var& a, double offset);
Var Square(const Var& a);
Var Abs(const Var& a);
Var Tanh(const Var& a);
Var Relu(const Var& a);
Var LeakyRelu(const Var& a, double slope);
Var Reshape(const Var& a, Shape shape);
// Rows [begin, end) along axis 0.
Var SliceRows(const Var& a, int begin, int end);

// Reductions to shape {1}.
Var Sum(const Var& a);
Var Mean(const Var& a);
Var WeightedSum(std::span<const Var> terms, std::span<const double> weights);

// Convolutions. Weights follow the (out, in, kH, kW) layout for Conv2d and
// (in, out, kH, kW) for ConvTranspose2d so that the same buffer gives an
// adjoint pair. Bias may be undefined.
struct ConvGeometry {
  int stride = 1;
  int padding = 0;
};
Var Conv2d(const Var& x, const Var& weight, const Var& bias, ConvGeometry g);
Var ConvTranspose2d(const Var& x, const Var& weight, const Var& bias,
                    ConvGeometry g);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};
Var BatchNorm2d(const Var& x, const Var& gamma, const Var& beta,
                BatchNormState& state, bool training);

Var UpsampleNearest(const Var& x, int factor);
Var Concat(std::span<const Var> parts);  // along axis 1
Var GlobalAvgPool(const Var& x);         // (B,C,H,W) -> (B,C)
Var Linear(const Var& x, const Var& weight, const Var& bias);

// 3x3 five-point Laplacian with replicate padding, per (n, c) plane.
Var LaplacianReplicate(const Var& x);
// Divides each (n, :, h, w) fiber by its L2 norm (+eps inside the root).
Var ChannelUnitNormalize(const Var& x, double eps = 1e-10);
// Elementwise complex modulus sqrt(re^2 + im^2); gradient 0 at the origin.
Var Modulus(const Var& re, const Var& im);
// Biased squared MMD between rows of x (N, D) and y (M, D) under
// k(a, b) = sum_n w_n exp(-|a-b|^2 / (2 sigma_n)).
Var Mmd2(const Var& x, const Var& y, std::span<const double> sigmas,
         std::span<const double> weights);
// Forward value is `value`; the gradient flows to `raw` unchanged.
Var StraightThrough(const Var& raw, Tensor value);

}  // namespace kcross::ag

#endif  // KCROSS_AUTOGRAD_HPP_
