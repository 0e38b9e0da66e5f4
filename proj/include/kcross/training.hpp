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


#ifndef KCROSS_TRAINING_HPP_
#define KCROSS_TRAINING_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kcross/losses.hpp"
#include "kcross/model.hpp"
#include "kcross/segmentation.hpp"

namespace kcross::training {

struct TrainConfig {
  int stage1_epochs = 40;
  int stage2_epochs = 20;
  int batch_size = 16;
  double learning_rate = 2e-4;
  double stage2_learning_rate = 2e-4;
  int patience = 5;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  losses::LossWeights weights;
  losses::MmdKernelBank mmd;
  losses::FrequencyReduction frequency_reduction =
      losses::FrequencyReduction::kSpatialAndChannelMean;
  losses::InconsistencyNorm inconsistency_norm = losses::InconsistencyNorm::kL1;
  std::string segmenter = "otsu_band";
  bool use_complex_branch = true;

  void Validate() const;
};

struct PairSample {
  std::string id;
  Image source;
  Image target;
  bool healthy = false;
};

struct RatedSample {
  std::string id;
  Image synthesized;
  double rating = 0.0;
  bool healthy = false;
};

struct EpochLosses {
  int epoch = 0;
  double frequency = 0.0;
  double tumor = 0.0;
  double structure = 0.0;
  double similarity = 0.0;
  double total = 0.0;
  double validation_total = 0.0;
};

struct Stage1Result {
  std::vector<EpochLosses> history;
  int epochs_run = 0;
  bool early_stopped = false;
};

// One optimizer step per branch per batch, in the order complex,
// tumor, structure. Data order and initialization depend only on the seed.
class Stage1Trainer {
 public:
  Stage1Trainer(model::KCrossModel& model, const TrainConfig& config,
                const seg::Segmenter& segmenter, const losses::LpipsBackbone& backbone);

  // Trains until the epoch budget, early stop, or `stop_after_epoch`
  // (exclusive count of completed epochs). When run_dir is nonempty, loss
  // logs and per-epoch checkpoints go there.
  Stage1Result Run(const std::vector<PairSample>& data, const std::string& run_dir,
                   std::optional<int> stop_after_epoch = std::nullopt);

  // Full trainer state: branch weights, optimizer moments, progress.
  void SaveCheckpoint(const std::string& path);
  void LoadCheckpoint(const std::string& path);

  int completed_epochs() const { return completed_epochs_; }

 private:
  struct Prepared;
  EpochLosses RunEpoch(const Prepared& data, const std::vector<int>& train, int epoch,
                       losses::LossLog* log);
  EpochLosses Evaluate(const Prepared& data, const std::vector<int>& rows);
  void CheckFinite(double value, const char* name, int epoch);

  model::KCrossModel& model_;
  TrainConfig config_;
  const seg::Segmenter& segmenter_;
  const losses::LpipsBackbone& backbone_;
  nn::Adam complex_opt_;
  nn::Adam tumor_opt_;
  nn::Adam structure_opt_;
  int completed_epochs_ = 0;
  double best_validation_ = 0.0;
  int bad_epochs_ = 0;
  bool stopped_ = false;
  long step_ = 0;
  std::vector<EpochLosses> history_;
  std::string run_dir_;
};

struct Stage2Result {
  double initial_inconsistency = 0.0;
  double final_inconsistency = 0.0;
  std::vector<double> history;  // L_inc per step
};

// Branches frozen: codes are computed once, all eta_total
// values are rank-aligned against the ratings, and n_nat / n_c follow
// L_inc through a straight-through estimator.
Stage2Result TrainStage2(model::KCrossModel& model, const model::Codes& codes,
                         const std::vector<double>& ratings, const TrainConfig& config,
                         losses::LossLog* log = nullptr);

// Throws kData naming every id without a rating.
void RequireRatings(const std::vector<std::string>& ids,
                    const std::vector<std::optional<double>>& ratings);

// Batches of `batch_size` over `order`; a trailing batch of one is merged
// into its predecessor.
std::vector<std::vector<int>> MakeBatches(const std::vector<int>& order, int batch_size);

// Deterministic shuffle for (seed, epoch).
std::vector<int> EpochOrder(const std::vector<int>& rows, std::uint64_t seed, int epoch);

// Saves / restores the complete model (branches, score nets, flags).
void SaveModel(const std::string& path, model::KCrossModel& model,
               const nlohmann::json& extra = nlohmann::json::object());
void LoadModel(const std::string& path, model::KCrossModel& model);
model::ModelConfig ModelConfigFromCheckpoint(const std::string& path);

nlohmann::json ModelConfigToJson(const model::ModelConfig& c);
model::ModelConfig ModelConfigFromJson(const nlohmann::json& j);

}  // namespace kcross::training

#endif  // KCROSS_TRAINING_HPP_
