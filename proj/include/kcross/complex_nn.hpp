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

// Complex-valued layers. A complex tensor is a pair of real planes with
// identical shape; every operator is built from real autograd primitives, so
// gradients with respect to both planes come for free.

#ifndef KCROSS_COMPLEX_NN_HPP_
#define KCROSS_COMPLEX_NN_HPP_

#include <random>
#include <string>
#include <vector>

#include "kcross/autograd.hpp"
#include "kcross/kspace.hpp"
#include "kcross/nn.hpp"

namespace kcross::cnn {

using ag::Var;

struct ComplexTensor {
  Var re;
  Var im;

  ComplexTensor() = default;
  ComplexTensor(Var r, Var i);

  const Shape& shape() const { return re.shape(); }
  static ComplexTensor Constant(Tensor re, Tensor im);
};

// Packs spectra as a (B, 1, M, N) complex tensor, each coefficient
// multiplied by `scale`.
ComplexTensor FromKSpace(std::span<const KSpaceImage> spectra, double scale);

// W = A + iB, bias = bias_re + i bias_im. A/B share (out, in, kH, kW) for
// convolution and (in, out, kH, kW) for transposed convolution.
struct ComplexConvWeights {
  Var a;
  Var b;
  Var bias_re;
  Var bias_im;
};

// (A*x - B*y) + i(B*x + A*y) with x = Re h, y = Im h.
ComplexTensor ComplexConv2d(const ComplexTensor& h, const ComplexConvWeights& w,
                            ag::ConvGeometry g);
ComplexTensor ComplexConvTranspose2d(const ComplexTensor& h,
                                     const ComplexConvWeights& w,
                                     ag::ConvGeometry g);

enum class Activation { kLeakyRelu, kRelu, kTanh };
ComplexTensor ComplexActivation(const ComplexTensor& z, Activation kind,
                                double leaky_slope = 0.2);
ComplexTensor ComplexUpsample(const ComplexTensor& z, int factor);
ComplexTensor ComplexConcat(std::span<const ComplexTensor> parts);
ComplexTensor ComplexGlobalAvgPool(const ComplexTensor& z);

// Complex dense layer: (x W_a^T - y W_b^T + b_re) + i(x W_b^T + y W_a^T + b_im).
ComplexTensor ComplexLinear(const ComplexTensor& z, const ComplexConvWeights& w);

// Independent batch normalization per plane, each with its own affine
// parameters and running statistics.
class ComplexBatchNorm {
 public:
  ComplexBatchNorm() = default;
  explicit ComplexBatchNorm(int channels);
  ComplexTensor Forward(const ComplexTensor& z, bool training);
  void Collect(const std::string& prefix, nn::StateDict& sd);

  nn::BatchNorm2dLayer re;
  nn::BatchNorm2dLayer im;
};

// Draws A and B independently with variance gain / (2 fan_in).
ComplexConvWeights InitComplexConv(int in, int out, int kernel, int fan_in,
                                   bool transposed, std::mt19937_64& rng,
                                   double gain = 1.0);
ComplexConvWeights InitComplexLinear(int in, int out, std::mt19937_64& rng,
                                     double gain = 1.0);
void CollectWeights(const std::string& prefix, ComplexConvWeights& w,
                    nn::StateDict& sd);

// Complex U-Net: depth x (ComplexConv2d, ComplexBatchNorm, CLeakyReLU) down
// blocks, (depth - 1) x (ComplexConvTranspose2d, ComplexBatchNorm, CReLU) up
// blocks with skip concatenation, and a (ComplexUpsample, ComplexConv2d,
// CTanh) head.
class ComplexUNet {
 public:
  ComplexUNet() = default;
  ComplexUNet(const nn::UNetSpec& spec, std::mt19937_64& rng);

  struct Output {
    ComplexTensor reconstruction;
    std::vector<ComplexTensor> features;  // one per encoder level
  };

  std::vector<ComplexTensor> Encode(const ComplexTensor& x, bool training);
  ComplexTensor Decode(const std::vector<ComplexTensor>& features,
                       bool training);
  Output Forward(const ComplexTensor& x, bool training);

  void CollectEncoder(const std::string& prefix, nn::StateDict& sd);
  void CollectDecoder(const std::string& prefix, nn::StateDict& sd);
  const nn::UNetSpec& spec() const { return spec_; }

 private:
  nn::UNetSpec spec_;
  std::vector<ComplexConvWeights> down_;
  std::vector<ComplexBatchNorm> down_bn_;
  std::vector<ComplexConvWeights> up_;
  std::vector<ComplexBatchNorm> up_bn_;
  ComplexConvWeights head_;
};

ComplexTensor PoolComplexFeatures(const std::vector<ComplexTensor>& features);

}  // namespace kcross::cnn

#endif  // KCROSS_COMPLEX_NN_HPP_
