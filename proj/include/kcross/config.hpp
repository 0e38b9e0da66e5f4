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


// Run configuration: one JSON document, every key optional, unknown keys
// rejected at any depth.
//
// {
//   "seed": 0,
//   "run_dir": "runs/default",
//   "model": {"depth", "base_channels", "kernel", "stride", "padding",
//             "leaky_slope", "code_dim", "hidden", "patch_size",
//             "kspace_input": "log_compressed" | "linear", "kspace_floor",
//             "kspace_gain", "combine": "sum" | "concat"},
//   "train": {"stage1_epochs", "stage2_epochs", "batch_size",
//             "learning_rate", "stage2_learning_rate", "patience",
//             "validation_fraction",
//             "frequency_reduction": "spatial_channel_mean" | "spatial_mean",
//             "inconsistency_norm": "l1" | "mse", "use_complex_branch"},
//   "loss_weights": {"tumor", "structure", "frequency", "similarity",
//                    "laplacian", "lpips"},
//   "mmd": {"sigmas": [...], "weights": [...]},
//   "segmenter": "otsu_band",
//   "phantom": {"n", "size", "seed", "kinds": [...], "healthy"},
//   "paths": {"manifest", "ratings", "stage1_checkpoint", "model_checkpoint"}
// }
//
// Relative paths resolve against the run directory.

#ifndef KCROSS_CONFIG_HPP_
#define KCROSS_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "kcross/model.hpp"
#include "kcross/phantom.hpp"
#include "kcross/training.hpp"

namespace kcross::config {

struct PhantomConfig {
  int n = 200;
  int size = 64;
  std::uint64_t seed = 0;
  std::vector<phantom::Degradation> kinds = {std::begin(phantom::kAllDegradations),
                                             std::end(phantom::kAllDegradations)};
  bool healthy = false;
};

struct Paths {
  std::string manifest = "data/manifest.jsonl";
  std::string ratings = "ratings.jsonl";
  std::string stage1_checkpoint = "stage1.kcx";
  std::string model_checkpoint = "model.kcx";
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string run_dir = "runs/default";
  model::ModelConfig model;
  training::TrainConfig train;
  PhantomConfig phantom;
  Paths paths;

  void Validate() const;
  // Joins a configured path with the run directory unless it is absolute.
  std::string Resolve(const std::string& path) const;
};

std::string FrequencyReductionName(losses::FrequencyReduction r);
losses::FrequencyReduction ParseFrequencyReduction(const std::string& name);
std::string InconsistencyNormName(losses::InconsistencyNorm n);
losses::InconsistencyNorm ParseInconsistencyNorm(const std::string& name);

RunConfig FromJson(const nlohmann::json& j);
nlohmann::json ToJson(const RunConfig& c);
RunConfig LoadFile(const std::string& path);
// Writes the fully resolved configuration, defaults included.
void WriteSnapshot(const RunConfig& c, const std::string& path);

}  // namespace kcross::config

#endif  // KCROSS_CONFIG_HPP_
