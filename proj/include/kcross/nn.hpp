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

#ifndef KCROSS_NN_HPP_
#define KCROSS_NN_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kcross/autograd.hpp"

namespace kcross::nn {

using ag::Var;

// Named view over a model's tensors. Trainable entries carry their Var so an
// optimizer can read gradients; buffers (running statistics, fixed
// projections) only expose storage.
struct StateEntry {
  std::string name;
  Tensor* tensor = nullptr;
  Var param;
  bool trainable = false;
};

class StateDict {
 public:
  void AddParam(const std::string& name, Var& var);
  void AddBuffer(const std::string& name, Tensor& tensor);

  const std::vector<StateEntry>& entries() const { return entries_; }
  std::vector<Var> Trainable() const;
  const StateEntry* Find(const std::string& name) const;
  std::uint64_t Checksum() const;
  void Append(const StateDict& other);

 private:
  std::vector<StateEntry> entries_;
};

Var MakeParam(Tensor value);

class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(int in, int out, int kernel, ag::ConvGeometry g,
              std::mt19937_64& rng, double gain = 2.0);
  Var Forward(const Var& x) const;
  void Collect(const std::string& prefix, StateDict& sd);

  Var weight;
  Var bias;
  ag::ConvGeometry geometry;
};

class ConvTranspose2dLayer {
 public:
  ConvTranspose2dLayer() = default;
  ConvTranspose2dLayer(int in, int out, int kernel, ag::ConvGeometry g,
                       std::mt19937_64& rng, double gain = 2.0);
  Var Forward(const Var& x) const;
  void Collect(const std::string& prefix, StateDict& sd);

  Var weight;
  Var bias;
  ag::ConvGeometry geometry;
};

class BatchNorm2dLayer {
 public:
  BatchNorm2dLayer() = default;
  explicit BatchNorm2dLayer(int channels);
  Var Forward(const Var& x, bool training);
  void Collect(const std::string& prefix, StateDict& sd);

  Var gamma;
  Var beta;
  ag::BatchNormState state;
};

class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(int in, int out, std::mt19937_64& rng, double gain = 2.0);
  Var Forward(const Var& x) const;
  void Collect(const std::string& prefix, StateDict& sd);

  Var weight;
  Var bias;
};

// Encoder/decoder topology shared by the real and complex networks.
struct UNetSpec {
  int depth = 3;
  int base_channels = 16;
  int kernel = 4;
  int stride = 2;
  int padding = 1;
  double leaky_slope = 0.2;
  int in_channels = 1;
  int out_channels = 1;

  int Channels(int level) const { return base_channels << level; }
  // Sum of encoder channel counts over all levels.
  int PooledWidth() const;
};

// Throws kShape with a padding hint unless h and w are divisible by
// stride^depth.
void CheckUNetInput(const UNetSpec& spec, int h, int w);

// Real-valued U-Net: depth x (conv, BN, LeakyReLU) down blocks,
// (depth - 1) x (transposed conv, BN, ReLU) up blocks with skip
// concatenation, and an (upsample, 3x3 conv, tanh) head.
class UNet {
 public:
  UNet() = default;
  UNet(const UNetSpec& spec, std::mt19937_64& rng);

  struct Output {
    Var reconstruction;
    std::vector<Var> features;
  };

  std::vector<Var> Encode(const Var& x, bool training);
  Var Decode(const std::vector<Var>& features, bool training);
  Output Forward(const Var& x, bool training);

  void CollectEncoder(const std::string& prefix, StateDict& sd);
  void CollectDecoder(const std::string& prefix, StateDict& sd);
  const UNetSpec& spec() const { return spec_; }

 private:
  UNetSpec spec_;
  std::vector<Conv2dLayer> down_;
  std::vector<BatchNorm2dLayer> down_bn_;
  std::vector<ConvTranspose2dLayer> up_;
  std::vector<BatchNorm2dLayer> up_bn_;
  Conv2dLayer head_;
};

// Global average pool of every level, concatenated along channels.
Var PoolFeatures(const std::vector<Var>& features);

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Var> params, AdamOptions options);

  void ZeroGrad();
  void Step();
  const std::vector<Var>& params() const { return params_; }
  long steps() const { return t_; }

  // Moment estimates, exposed for checkpoint/resume.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamOptions options_;
  long t_ = 0;
};

}  // namespace kcross::nn

#endif  // KCROSS_NN_HPP_
