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


#ifndef KCROSS_LOSSES_HPP_
#define KCROSS_LOSSES_HPP_

#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "kcross/autograd.hpp"
#include "kcross/complex_nn.hpp"
#include "kcross/nn.hpp"

namespace kcross::losses {

using ag::Var;

struct LossWeights {
  double tumor = 1.0;      // lambda_1
  double structure = 1.0;  // lambda_2
  double frequency = 1.0;  // lambda_3
  double similarity = 1.0; // lambda_4
  double laplacian = 1.0;
  double lpips = 1.0;

  void Validate() const;
};

struct MmdKernelBank {
  std::vector<double> sigmas = {1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<double> weights = {1.0, 1.0, 1.0, 1.0, 1.0};

  void Validate() const;
  // Weights rescaled to sum to one.
  std::vector<double> NormalizedWeights() const;
};

// Per-layer reduction of the squared complex distance.
enum class FrequencyReduction { kSpatialAndChannelMean, kSpatialMean };

// Sum over layers of the mean squared distance between paired complex
// features, |v_r - v_f|^2 = (a_r - a_f)^2 + (b_r - b_f)^2.
Var FrequencyLoss(const std::vector<cnn::ComplexTensor>& real,
                  const std::vector<cnn::ComplexTensor>& fake,
                  FrequencyReduction reduction =
                      FrequencyReduction::kSpatialAndChannelMean);

// Biased squared MMD between structure codes (N, D).
Var SimilarityLoss(const Var& h_src, const Var& h_tgt, const MmdKernelBank& bank);

// Frozen feature extractor for the perceptual term. The default is a
// fixed-seed random 4-layer conv stack; weights never require gradients.
class LpipsBackbone {
 public:
  explicit LpipsBackbone(std::uint64_t seed = 0x5eed, int width = 8);

  std::vector<Var> Features(const Var& x) const;
  std::uint64_t Checksum() const;
  int layers() const { return static_cast<int>(convs_.size()); }

 private:
  std::vector<nn::Conv2dLayer> convs_;
};

// Mean over layers of the mean squared difference of channel-normalized
// features.
Var LpipsLoss(const Var& x, const Var& x_hat, const LpipsBackbone& backbone);

// Mean squared difference of 3x3 replicate-padded Laplacians.
Var LaplacianLoss(const Var& x, const Var& x_hat);

Var TumorLoss(const Var& x, const Var& x_hat, const LossWeights& weights,
              const LpipsBackbone* backbone);

// Mean absolute error.
Var StructureLoss(const Var& x, const Var& x_hat);

enum class InconsistencyNorm { kL1, kMse };

// Mean |eta_total - eta_ra| (or squared). Both must lie in [0, 1].
Var InconsistencyLoss(const Var& eta_total, const Var& eta_ra,
                      InconsistencyNorm norm = InconsistencyNorm::kL1);

struct Stage1Parts {
  Var tumor;
  Var structure;
  Var frequency;
  Var similarity;
};

Var Stage1Total(const Stage1Parts& parts, const LossWeights& weights);
Var Stage2Total(const Var& inconsistency);

// Appends {"step", "loss_name", "value"} records, one JSON object per line.
class LossLog {
 public:
  LossLog() = default;
  explicit LossLog(const std::string& path);

  void Record(long step, const std::string& name, double value);
  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

}  // namespace kcross::losses

#endif  // KCROSS_LOSSES_HPP_
