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

#include "kcross/complex_nn.hpp"

#include <cmath>

#include "kcross/errors.hpp"

namespace kcross::cnn {

ComplexTensor::ComplexTensor(Var r, Var i) : re(std::move(r)), im(std::move(i)) {
  if (re.shape() != im.shape()) {
    Fail(ErrorKind::kShape, "complex tensor planes differ: " +
                                ShapeString(re.shape()) + " vs " +
                                ShapeString(im.shape()));
  }
}

ComplexTensor ComplexTensor::Constant(Tensor re, Tensor im) {
  return ComplexTensor(ag::Constant(std::move(re)), ag::Constant(std::move(im)));
}

ComplexTensor FromKSpace(std::span<const KSpaceImage> spectra, double scale) {
  if (spectra.empty()) Fail(ErrorKind::kInvalidArgument, "no spectra");
  const int m = spectra[0].rows, n = spectra[0].cols;
  const int b = static_cast<int>(spectra.size());
  Tensor re({b, 1, m, n}), im({b, 1, m, n});
  const std::size_t plane = static_cast<std::size_t>(m) * n;
  for (int i = 0; i < b; ++i) {
    const KSpaceImage raw = UncenterShift(spectra[i]);
    if (raw.rows != m || raw.cols != n) {
      Fail(ErrorKind::kShape, "spectra in a batch must share a shape");
    }
    for (std::size_t p = 0; p < plane; ++p) {
      re[i * plane + p] = raw.values[p].real() * scale;
      im[i * plane + p] = raw.values[p].imag() * scale;
    }
  }
  return ComplexTensor::Constant(std::move(re), std::move(im));
}

ComplexTensor ComplexConv2d(const ComplexTensor& h, const ComplexConvWeights& w,
                            ag::ConvGeometry g) {
  const Var none;
  Var re = ag::Sub(ag::Conv2d(h.re, w.a, w.bias_re, g),
                   ag::Conv2d(h.im, w.b, none, g));
  Var im = ag::Add(ag::Conv2d(h.re, w.b, w.bias_im, g),
                   ag::Conv2d(h.im, w.a, none, g));
  return {re, im};
}

ComplexTensor ComplexConvTranspose2d(const ComplexTensor& h,
                                     const ComplexConvWeights& w,
                                     ag::ConvGeometry g) {
  const Var none;
  Var re = ag::Sub(ag::ConvTranspose2d(h.re, w.a, w.bias_re, g),
                   ag::ConvTranspose2d(h.im, w.b, none, g));
  Var im = ag::Add(ag::ConvTranspose2d(h.re, w.b, w.bias_im, g),
                   ag::ConvTranspose2d(h.im, w.a, none, g));
  return {re, im};
}

ComplexTensor ComplexActivation(const ComplexTensor& z, Activation kind,
                                double leaky_slope) {
  switch (kind) {
    case Activation::kLeakyRelu:
      return {ag::LeakyRelu(z.re, leaky_slope), ag::LeakyRelu(z.im, leaky_slope)};
    case Activation::kRelu:
      return {ag::Relu(z.re), ag::Relu(z.im)};
    case Activation::kTanh:
      return {ag::Tanh(z.re), ag::Tanh(z.im)};
  }
  Fail(ErrorKind::kInvalidArgument, "unknown activation");
}

ComplexTensor ComplexUpsample(const ComplexTensor& z, int factor) {
  return {ag::UpsampleNearest(z.re, factor), ag::UpsampleNearest(z.im, factor)};
}

ComplexTensor ComplexConcat(std::span<const ComplexTensor> parts) {
  std::vector<Var> re, im;
  for (const auto& p : parts) {
    re.push_back(p.re);
    im.push_back(p.im);
  }
  return {ag::Concat(re), ag::Concat(im)};
}

ComplexTensor ComplexGlobalAvgPool(const ComplexTensor& z) {
  return {ag::GlobalAvgPool(z.re), ag::GlobalAvgPool(z.im)};
}

ComplexTensor ComplexLinear(const ComplexTensor& z, const ComplexConvWeights& w) {
  const Var none;
  Var re = ag::Sub(ag::Linear(z.re, w.a, w.bias_re), ag::Linear(z.im, w.b, none));
  Var im = ag::Add(ag::Linear(z.re, w.b, w.bias_im), ag::Linear(z.im, w.a, none));
  return {re, im};
}

ComplexBatchNorm::ComplexBatchNorm(int channels) : re(channels), im(channels) {}

ComplexTensor ComplexBatchNorm::Forward(const ComplexTensor& z, bool training) {
  return {re.Forward(z.re, training), im.Forward(z.im, training)};
}

void ComplexBatchNorm::Collect(const std::string& prefix, nn::StateDict& sd) {
  re.Collect(prefix + ".re", sd);
  im.Collect(prefix + ".im", sd);
}

ComplexConvWeights InitComplexConv(int in, int out, int kernel, int fan_in,
                                   bool transposed, std::mt19937_64& rng,
                                   double gain) {
  const double stddev = std::sqrt(gain / (2.0 * fan_in));
  const Shape shape = transposed ? Shape{in, out, kernel, kernel}
                                 : Shape{out, in, kernel, kernel};
  ComplexConvWeights w;
  w.a = nn::MakeParam(Tensor::Randn(shape, rng, stddev));
  w.b = nn::MakeParam(Tensor::Randn(shape, rng, stddev));
  w.bias_re = nn::MakeParam(Tensor({out}, 0.0));
  w.bias_im = nn::MakeParam(Tensor({out}, 0.0));
  return w;
}

ComplexConvWeights InitComplexLinear(int in, int out, std::mt19937_64& rng,
                                     double gain) {
  const double stddev = std::sqrt(gain / (2.0 * in));
  ComplexConvWeights w;
  w.a = nn::MakeParam(Tensor::Randn({out, in}, rng, stddev));
  w.b = nn::MakeParam(Tensor::Randn({out, in}, rng, stddev));
  w.bias_re = nn::MakeParam(Tensor({out}, 0.0));
  w.bias_im = nn::MakeParam(Tensor({out}, 0.0));
  return w;
}

void CollectWeights(const std::string& prefix, ComplexConvWeights& w,
                    nn::StateDict& sd) {
  sd.AddParam(prefix + ".A", w.a);
  sd.AddParam(prefix + ".B", w.b);
  if (w.bias_re.defined()) sd.AddParam(prefix + ".bias_re", w.bias_re);
  if (w.bias_im.defined()) sd.AddParam(prefix + ".bias_im", w.bias_im);
}

ComplexUNet::ComplexUNet(const nn::UNetSpec& spec, std::mt19937_64& rng)
    : spec_(spec) {
  if (spec.depth < 1 || spec.base_channels < 1) {
    Fail(ErrorKind::kConfig, "complex U-Net depth and base_channels must be >= 1");
  }
  const int k = spec.kernel;
  int in = spec.in_channels;
  for (int l = 0; l < spec.depth; ++l) {
    // Leaky-ReLU follows each down block; gain 2 keeps activations O(1).
    down_.push_back(InitComplexConv(in, spec.Channels(l), k, in * k * k, false,
                                    rng, 2.0));
    down_bn_.emplace_back(spec.Channels(l));
    in = spec.Channels(l);
  }
  const double per_axis = static_cast<double>(k) / spec.stride;
  for (int l = spec.depth - 2; l >= 0; --l) {
    const int up_in =
        (l == spec.depth - 2) ? spec.Channels(l + 1) : 2 * spec.Channels(l + 1);
    const int fan_in = static_cast<int>(up_in * per_axis * per_axis);
    up_.push_back(
        InitComplexConv(up_in, spec.Channels(l), k, fan_in, true, rng, 2.0));
    up_bn_.emplace_back(spec.Channels(l));
  }
  const int head_in = spec.depth >= 2 ? 2 * spec.Channels(0) : spec.Channels(0);
  head_ = InitComplexConv(head_in, spec.out_channels, 3, head_in * 9, false, rng);
}

std::vector<ComplexTensor> ComplexUNet::Encode(const ComplexTensor& x,
                                               bool training) {
  if (x.re.value().rank() != 4 || x.shape()[1] != spec_.in_channels) {
    Fail(ErrorKind::kShape, "complex U-Net expects (B, " +
                                std::to_string(spec_.in_channels) +
                                ", H, W) input, got " + ShapeString(x.shape()));
  }
  nn::CheckUNetInput(spec_, x.shape()[2], x.shape()[3]);
  const ag::ConvGeometry g{spec_.stride, spec_.padding};
  std::vector<ComplexTensor> features;
  ComplexTensor h = x;
  for (int l = 0; l < spec_.depth; ++l) {
    h = ComplexConv2d(h, down_[l], g);
    h = down_bn_[l].Forward(h, training);
    h = ComplexActivation(h, Activation::kLeakyRelu, spec_.leaky_slope);
    features.push_back(h);
  }
  return features;
}

ComplexTensor ComplexUNet::Decode(const std::vector<ComplexTensor>& features,
                                  bool training) {
  if (static_cast<int>(features.size()) != spec_.depth) {
    Fail(ErrorKind::kShape, "complex U-Net decode: wrong number of levels");
  }
  const ag::ConvGeometry g{spec_.stride, spec_.padding};
  ComplexTensor h = features.back();
  for (int i = 0; i < spec_.depth - 1; ++i) {
    const int l = spec_.depth - 2 - i;
    h = ComplexConvTranspose2d(h, up_[i], g);
    h = up_bn_[i].Forward(h, training);
    h = ComplexActivation(h, Activation::kRelu);
    const ComplexTensor parts[] = {h, features[l]};
    h = ComplexConcat(parts);
  }
  h = ComplexUpsample(h, spec_.stride);
  h = ComplexConv2d(h, head_, {1, 1});
  return ComplexActivation(h, Activation::kTanh);
}

ComplexUNet::Output ComplexUNet::Forward(const ComplexTensor& x, bool training) {
  Output out;
  out.features = Encode(x, training);
  out.reconstruction = Decode(out.features, training);
  return out;
}

void ComplexUNet::CollectEncoder(const std::string& prefix, nn::StateDict& sd) {
  for (std::size_t l = 0; l < down_.size(); ++l) {
    CollectWeights(prefix + ".down" + std::to_string(l) + ".conv", down_[l], sd);
    down_bn_[l].Collect(prefix + ".down" + std::to_string(l) + ".bn", sd);
  }
}

void ComplexUNet::CollectDecoder(const std::string& prefix, nn::StateDict& sd) {
  for (std::size_t i = 0; i < up_.size(); ++i) {
    CollectWeights(prefix + ".up" + std::to_string(i) + ".convt", up_[i], sd);
    up_bn_[i].Collect(prefix + ".up" + std::to_string(i) + ".bn", sd);
  }
  CollectWeights(prefix + ".head", head_, sd);
}

ComplexTensor PoolComplexFeatures(const std::vector<ComplexTensor>& features) {
  std::vector<ComplexTensor> pooled;
  for (const auto& f : features) pooled.push_back(ComplexGlobalAvgPool(f));
  return ComplexConcat(pooled);
}

}  // namespace kcross::cnn
