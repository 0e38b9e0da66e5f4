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


#ifndef KCROSS_MODEL_HPP_
#define KCROSS_MODEL_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "kcross/complex_nn.hpp"
#include "kcross/nn.hpp"
#include "kcross/segmentation.hpp"

namespace kcross::model {

using ag::Var;

// How a spectrum is presented to the complex network. kLogCompressed keeps
// the phase and maps |F| / (M N) through log1p(m / floor) / log1p(1 / floor).
enum class KspaceInput { kLogCompressed, kLinear };
enum class CodeCombine { kSum, kConcat };

struct ModelConfig {
  nn::UNetSpec unet;
  int code_dim = 512;
  int hidden = 256;
  int patch_size = 64;
  KspaceInput kspace_input = KspaceInput::kLogCompressed;
  double kspace_floor = 1e-4;
  double kspace_gain = 2.0;
  CodeCombine combine = CodeCombine::kSum;

  void Validate() const;
};

std::string KspaceInputName(KspaceInput k);
KspaceInput ParseKspaceInput(const std::string& name);
std::string CodeCombineName(CodeCombine c);
CodeCombine ParseCodeCombine(const std::string& name);

// Network input for a batch of images.
cnn::ComplexTensor KspaceBatch(std::span<const Image> images, const ModelConfig& config);

// The three feature paths. Tumor and complex branches are private per
// modality; the structure U-Net is a single instance used for both.
class BranchSet {
 public:
  BranchSet(const ModelConfig& config, std::mt19937_64& rng);

  nn::UNet tumor_target;
  nn::UNet tumor_source;
  cnn::ComplexUNet complex_target;
  cnn::ComplexUNet complex_source;
  nn::UNet structure;

  // Fixed projections from pooled encoder features to the code width.
  Tensor proj_tumor;
  Tensor proj_structure;
  Tensor proj_complex;

  nn::StateDict ComplexTargetState();
  nn::StateDict TumorTargetState();
  nn::StateDict StructureState();
  nn::StateDict SourcePrivateState();
  nn::StateDict ProjectionState();
  nn::StateDict State();

  Var TumorCode(const std::vector<Var>& features) const;
  Var StructureCode(const std::vector<Var>& features) const;
  cnn::ComplexTensor ComplexCode(const std::vector<cnn::ComplexTensor>& features) const;
};

// n_nat: Linear(D_in, hidden), ReLU, Linear(hidden, 1).
// n_c: complex Linear(D, hidden), complex ReLU, complex Linear(hidden, 1),
// modulus.
class ScoreNets {
 public:
  ScoreNets(const ModelConfig& config, std::mt19937_64& rng);

  Var Natural(const Var& code) const;
  Var ComplexScore(const cnn::ComplexTensor& code) const;

  nn::LinearLayer nat1, nat2;
  cnn::ComplexConvWeights c1, c2;

  nn::StateDict NaturalState();
  nn::StateDict ComplexState();
  nn::StateDict State();
};

struct ScoreReport {
  double eta_complex = 0.0;
  double eta_nat = 0.0;
  double eta_total = 0.0;
  bool rank_aligned = false;
  bool health_path = false;
  double tumor_code_norm = 0.0;
  double structure_code_norm = 0.0;
  double complex_code_norm = 0.0;
  double lesion_coverage = 0.0;

  nlohmann::json ToJson() const;
};

// Pooled branch codes for a set of images, computed in inference mode.
struct Codes {
  Tensor tumor;       // (B, D); zero rows for healthy images
  Tensor structure;   // (B, D)
  Tensor complex_re;  // (B, D)
  Tensor complex_im;  // (B, D)
  std::vector<bool> healthy;
  std::vector<double> lesion_coverage;
};

struct ScoreOptions {
  bool use_complex = true;
  bool use_natural = true;
};

class KCrossModel {
 public:
  KCrossModel(const ModelConfig& config, std::uint64_t seed);
  KCrossModel(const KCrossModel&) = delete;
  KCrossModel& operator=(const KCrossModel&) = delete;

  const ModelConfig& config() const { return config_; }
  BranchSet& branches() { return branches_; }
  ScoreNets& nets() { return nets_; }

  bool stage1_trained = false;
  bool stage2_trained = false;
  ScoreOptions options;

  // Segments lesion-path images with `segmenter` (never invoked for healthy
  // ones), then encodes every image with the three target-side encoders.
  Codes Encode(std::span<const Image> images, const std::vector<bool>& healthy,
               const seg::Segmenter* segmenter);

  // eta_nat, eta_complex for precomputed codes, as graph nodes of shape
  // (B, 1).
  struct Heads {
    Var nat;
    Var complex;
    Var total;
  };
  Heads ScoreCodes(const Codes& codes) const;

  ScoreReport Score(const Image& t_hat, const seg::Segmenter* segmenter, bool healthy);
  std::vector<ScoreReport> ScoreBatch(std::span<const Image> images,
                                      const std::vector<bool>& healthy,
                                      const seg::Segmenter* segmenter);

  // Every tensor, including projections and BN statistics.
  nn::StateDict State();

 private:
  ModelConfig config_;
  BranchSet branches_;
  ScoreNets nets_;
};

// Rounds to a multiple of 2^-36 so sums of two scores are exact.
double QuantizeScore(double v);

}  // namespace kcross::model

#endif  // KCROSS_MODEL_HPP_
