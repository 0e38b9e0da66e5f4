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

#include "kcross/nn.hpp"

#include <cmath>

#include "kcross/errors.hpp"

namespace kcross::nn {

void StateDict::AddParam(const std::string& name, Var& var) {
  entries_.push_back({name, &var.mutable_value(), var, true});
}

void StateDict::AddBuffer(const std::string& name, Tensor& tensor) {
  entries_.push_back({name, &tensor, Var(), false});
}

std::vector<Var> StateDict::Trainable() const {
  std::vector<Var> out;
  for (const auto& e : entries_)
    if (e.trainable) out.push_back(e.param);
  return out;
}

const StateEntry* StateDict::Find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

std::uint64_t StateDict::Checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& e : entries_) {
    h = Fnv1a(e.name.data(), e.name.size(), h);
    h = Fnv1a(e.tensor->data(), e.tensor->numel() * sizeof(double), h);
  }
  return h;
}

void StateDict::Append(const StateDict& other) {
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

Var MakeParam(Tensor value) { return Var(std::move(value), true); }

Conv2dLayer::Conv2dLayer(int in, int out, int kernel, ag::ConvGeometry g,
                         std::mt19937_64& rng, double gain)
    : geometry(g) {
  const double fan_in = static_cast<double>(in) * kernel * kernel;
  weight = MakeParam(
      Tensor::Randn({out, in, kernel, kernel}, rng, std::sqrt(gain / fan_in)));
  bias = MakeParam(Tensor({out}, 0.0));
}

Var Conv2dLayer::Forward(const Var& x) const {
  return ag::Conv2d(x, weight, bias, geometry);
}

void Conv2dLayer::Collect(const std::string& prefix, StateDict& sd) {
  sd.AddParam(prefix + ".weight", weight);
  sd.AddParam(prefix + ".bias", bias);
}

ConvTranspose2dLayer::ConvTranspose2dLayer(int in, int out, int kernel,
                                           ag::ConvGeometry g,
                                           std::mt19937_64& rng, double gain)
    : geometry(g) {
  // Each output pixel sees roughly in * (kernel / stride)^2 inputs.
  const double per_axis = static_cast<double>(kernel) / g.stride;
  const double fan_in = in * per_axis * per_axis;
  weight = MakeParam(
      Tensor::Randn({in, out, kernel, kernel}, rng, std::sqrt(gain / fan_in)));
  bias = MakeParam(Tensor({out}, 0.0));
}

Var ConvTranspose2dLayer::Forward(const Var& x) const {
  return ag::ConvTranspose2d(x, weight, bias, geometry);
}

void ConvTranspose2dLayer::Collect(const std::string& prefix, StateDict& sd) {
  sd.AddParam(prefix + ".weight", weight);
  sd.AddParam(prefix + ".bias", bias);
}

BatchNorm2dLayer::BatchNorm2dLayer(int channels) {
  gamma = MakeParam(Tensor({channels}, 1.0));
  beta = MakeParam(Tensor({channels}, 0.0));
  state.running_mean = Tensor({channels}, 0.0);
  state.running_var = Tensor({channels}, 1.0);
}

Var BatchNorm2dLayer::Forward(const Var& x, bool training) {
  return ag::BatchNorm2d(x, gamma, beta, state, training);
}

void BatchNorm2dLayer::Collect(const std::string& prefix, StateDict& sd) {
  sd.AddParam(prefix + ".gamma", gamma);
  sd.AddParam(prefix + ".beta", beta);
  sd.AddBuffer(prefix + ".running_mean", state.running_mean);
  sd.AddBuffer(prefix + ".running_var", state.running_var);
}

LinearLayer::LinearLayer(int in, int out, std::mt19937_64& rng, double gain) {
  weight = MakeParam(Tensor::Randn({out, in}, rng, std::sqrt(gain / in)));
  bias = MakeParam(Tensor({out}, 0.0));
}

Var LinearLayer::Forward(const Var& x) const {
  return ag::Linear(x, weight, bias);
}

void LinearLayer::Collect(const std::string& prefix, StateDict& sd) {
  sd.AddParam(prefix + ".weight", weight);
  sd.AddParam(prefix + ".bias", bias);
}

int UNetSpec::PooledWidth() const {
  int total = 0;
  for (int l = 0; l < depth; ++l) total += Channels(l);
  return total;
}

void CheckUNetInput(const UNetSpec& spec, int h, int w) {
  int factor = 1;
  for (int l = 0; l < spec.depth; ++l) factor *= spec.stride;
  auto pad_to = [factor](int v) { return ((v + factor - 1) / factor) * factor; };
  if (h % factor != 0 || w % factor != 0) {
    Fail(ErrorKind::kShape,
         "U-Net input " + std::to_string(h) + "x" + std::to_string(w) +
             " is not divisible by " + std::to_string(factor) +
             "; pad to " + std::to_string(pad_to(h)) + "x" +
             std::to_string(pad_to(w)));
  }
}

UNet::UNet(const UNetSpec& spec, std::mt19937_64& rng) : spec_(spec) {
  if (spec.depth < 1 || spec.base_channels < 1) {
    Fail(ErrorKind::kConfig, "U-Net depth and base_channels must be >= 1");
  }
  const ag::ConvGeometry down{spec.stride, spec.padding};
  int in = spec.in_channels;
  for (int l = 0; l < spec.depth; ++l) {
    down_.emplace_back(in, spec.Channels(l), spec.kernel, down, rng);
    down_bn_.emplace_back(spec.Channels(l));
    in = spec.Channels(l);
  }
  for (int l = spec.depth - 2; l >= 0; --l) {
    const int up_in =
        (l == spec.depth - 2) ? spec.Channels(l + 1) : 2 * spec.Channels(l + 1);
    up_.emplace_back(up_in, spec.Channels(l), spec.kernel, down, rng);
    up_bn_.emplace_back(spec.Channels(l));
  }
  const int head_in = spec.depth >= 2 ? 2 * spec.Channels(0) : spec.Channels(0);
  head_ = Conv2dLayer(head_in, spec.out_channels, 3, {1, 1}, rng, 1.0);
}

std::vector<Var> UNet::Encode(const Var& x, bool training) {
  if (x.value().rank() != 4 || x.shape()[1] != spec_.in_channels) {
    Fail(ErrorKind::kShape, "U-Net expects (B, " +
                                std::to_string(spec_.in_channels) +
                                ", H, W) input, got " + ShapeString(x.shape()));
  }
  CheckUNetInput(spec_, x.shape()[2], x.shape()[3]);
  std::vector<Var> features;
  Var h = x;
  for (int l = 0; l < spec_.depth; ++l) {
    h = down_[l].Forward(h);
    h = down_bn_[l].Forward(h, training);
    h = ag::LeakyRelu(h, spec_.leaky_slope);
    features.push_back(h);
  }
  return features;
}

Var UNet::Decode(const std::vector<Var>& features, bool training) {
  if (static_cast<int>(features.size()) != spec_.depth) {
    Fail(ErrorKind::kShape, "U-Net decode: wrong number of feature levels");
  }
  Var h = features.back();
  for (int i = 0; i < spec_.depth - 1; ++i) {
    const int l = spec_.depth - 2 - i;
    h = up_[i].Forward(h);
    h = up_bn_[i].Forward(h, training);
    h = ag::Relu(h);
    const Var parts[] = {h, features[l]};
    h = ag::Concat(parts);
  }
  h = ag::UpsampleNearest(h, spec_.stride);
  h = head_.Forward(h);
  return ag::Tanh(h);
}

UNet::Output UNet::Forward(const Var& x, bool training) {
  Output out;
  out.features = Encode(x, training);
  out.reconstruction = Decode(out.features, training);
  return out;
}

void UNet::CollectEncoder(const std::string& prefix, StateDict& sd) {
  for (std::size_t l = 0; l < down_.size(); ++l) {
    down_[l].Collect(prefix + ".down" + std::to_string(l) + ".conv", sd);
    down_bn_[l].Collect(prefix + ".down" + std::to_string(l) + ".bn", sd);
  }
}

void UNet::CollectDecoder(const std::string& prefix, StateDict& sd) {
  for (std::size_t i = 0; i < up_.size(); ++i) {
    up_[i].Collect(prefix + ".up" + std::to_string(i) + ".convt", sd);
    up_bn_[i].Collect(prefix + ".up" + std::to_string(i) + ".bn", sd);
  }
  head_.Collect(prefix + ".head", sd);
}

Var PoolFeatures(const std::vector<Var>& features) {
  std::vector<Var> pooled;
  pooled.reserve(features.size());
  for (const Var& f : features) pooled.push_back(ag::GlobalAvgPool(f));
  return ag::Concat(pooled);
}

Adam::Adam(std::vector<Var> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const Var& p : params_) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void Adam::ZeroGrad() {
  for (Var& p : params_) p.ZeroGrad();
}

void Adam::Step() {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& w = params_[k].mutable_value();
    const Tensor& g = params_[k].grad();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < w.numel(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      w[i] -= options_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.eps);
    }
  }
}

}  // namespace kcross::nn
