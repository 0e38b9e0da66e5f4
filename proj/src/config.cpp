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


#include "kcross/config.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "kcross/errors.hpp"

namespace kcross::config {
namespace {

using nlohmann::json;

void RequireObject(const json& j, const std::string& where) {
  if (!j.is_object()) Fail(ErrorKind::kConfig, where + " must be an object");
}

void RejectUnknown(const json& j, const std::string& where,
                   std::initializer_list<const char*> allowed) {
  RequireObject(j, where);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) Fail(ErrorKind::kConfig, "unknown config key " + where + "." + key);
  }
}

template <typename T>
void Read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    Fail(ErrorKind::kConfig, "config key " + where + "." + key + " has the wrong type");
  }
}

}  // namespace

std::string FrequencyReductionName(losses::FrequencyReduction r) {
  return r == losses::FrequencyReduction::kSpatialMean ? "spatial_mean"
                                                       : "spatial_channel_mean";
}

losses::FrequencyReduction ParseFrequencyReduction(const std::string& name) {
  if (name == "spatial_channel_mean") return losses::FrequencyReduction::kSpatialAndChannelMean;
  if (name == "spatial_mean") return losses::FrequencyReduction::kSpatialMean;
  Fail(ErrorKind::kConfig, "unknown frequency_reduction '" + name + "'");
}

std::string InconsistencyNormName(losses::InconsistencyNorm n) {
  return n == losses::InconsistencyNorm::kMse ? "mse" : "l1";
}

losses::InconsistencyNorm ParseInconsistencyNorm(const std::string& name) {
  if (name == "l1") return losses::InconsistencyNorm::kL1;
  if (name == "mse") return losses::InconsistencyNorm::kMse;
  Fail(ErrorKind::kConfig, "unknown inconsistency_norm '" + name + "'");
}

void RunConfig::Validate() const {
  model.Validate();
  train.Validate();
  if (run_dir.empty()) Fail(ErrorKind::kConfig, "run_dir must not be empty");
  if (phantom.n < 1 || phantom.size < 8) {
    Fail(ErrorKind::kConfig, "phantom: n must be >= 1 and size >= 8");
  }
  if (phantom.kinds.empty()) Fail(ErrorKind::kConfig, "phantom: kinds must not be empty");
  if (phantom.healthy) {
    for (auto k : phantom.kinds) {
      if (k == phantom::Degradation::kTumorTextureCorrupt) {
        Fail(ErrorKind::kConfig, "phantom: tumor_texture_corrupt needs lesion phantoms");
      }
    }
  }
}

std::string RunConfig::Resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(run_dir) / p).string();
}

RunConfig FromJson(const json& j) {
  RejectUnknown(j, "config",
                {"seed", "run_dir", "model", "train", "loss_weights", "mmd", "segmenter",
                 "phantom", "paths"});
  RunConfig c;
  Read(j, "seed", c.seed, "config");
  Read(j, "run_dir", c.run_dir, "config");
  if (j.contains("model")) c.model = training::ModelConfigFromJson(j.at("model"));

  if (j.contains("train")) {
    const json& t = j.at("train");
    RejectUnknown(t, "train",
                  {"stage1_epochs", "stage2_epochs", "batch_size", "learning_rate",
                   "stage2_learning_rate", "patience", "validation_fraction",
                   "frequency_reduction", "inconsistency_norm", "use_complex_branch"});
    Read(t, "stage1_epochs", c.train.stage1_epochs, "train");
    Read(t, "stage2_epochs", c.train.stage2_epochs, "train");
    Read(t, "batch_size", c.train.batch_size, "train");
    Read(t, "learning_rate", c.train.learning_rate, "train");
    Read(t, "stage2_learning_rate", c.train.stage2_learning_rate, "train");
    Read(t, "patience", c.train.patience, "train");
    Read(t, "validation_fraction", c.train.validation_fraction, "train");
    Read(t, "use_complex_branch", c.train.use_complex_branch, "train");
    std::string name = FrequencyReductionName(c.train.frequency_reduction);
    Read(t, "frequency_reduction", name, "train");
    c.train.frequency_reduction = ParseFrequencyReduction(name);
    name = InconsistencyNormName(c.train.inconsistency_norm);
    Read(t, "inconsistency_norm", name, "train");
    c.train.inconsistency_norm = ParseInconsistencyNorm(name);
  }
  c.train.seed = c.seed;

  if (j.contains("loss_weights")) {
    const json& w = j.at("loss_weights");
    RejectUnknown(w, "loss_weights",
                  {"tumor", "structure", "frequency", "similarity", "laplacian", "lpips"});
    auto& lw = c.train.weights;
    Read(w, "tumor", lw.tumor, "loss_weights");
    Read(w, "structure", lw.structure, "loss_weights");
    Read(w, "frequency", lw.frequency, "loss_weights");
    Read(w, "similarity", lw.similarity, "loss_weights");
    Read(w, "laplacian", lw.laplacian, "loss_weights");
    Read(w, "lpips", lw.lpips, "loss_weights");
  }
  if (j.contains("mmd")) {
    const json& m = j.at("mmd");
    RejectUnknown(m, "mmd", {"sigmas", "weights"});
    Read(m, "sigmas", c.train.mmd.sigmas, "mmd");
    Read(m, "weights", c.train.mmd.weights, "mmd");
  }
  Read(j, "segmenter", c.train.segmenter, "config");

  if (j.contains("phantom")) {
    const json& p = j.at("phantom");
    RejectUnknown(p, "phantom", {"n", "size", "seed", "kinds", "healthy"});
    Read(p, "n", c.phantom.n, "phantom");
    Read(p, "size", c.phantom.size, "phantom");
    Read(p, "seed", c.phantom.seed, "phantom");
    Read(p, "healthy", c.phantom.healthy, "phantom");
    if (p.contains("kinds")) {
      std::vector<std::string> names;
      Read(p, "kinds", names, "phantom");
      c.phantom.kinds.clear();
      for (const auto& n : names) c.phantom.kinds.push_back(phantom::ParseDegradation(n));
    }
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    RejectUnknown(p, "paths", {"manifest", "ratings", "stage1_checkpoint", "model_checkpoint"});
    Read(p, "manifest", c.paths.manifest, "paths");
    Read(p, "ratings", c.paths.ratings, "paths");
    Read(p, "stage1_checkpoint", c.paths.stage1_checkpoint, "paths");
    Read(p, "model_checkpoint", c.paths.model_checkpoint, "paths");
  }
  c.Validate();
  return c;
}

json ToJson(const RunConfig& c) {
  json kinds = json::array();
  for (auto k : c.phantom.kinds) kinds.push_back(phantom::DegradationName(k));
  const auto& w = c.train.weights;
  return {
      {"seed", c.seed},
      {"run_dir", c.run_dir},
      {"model", training::ModelConfigToJson(c.model)},
      {"train",
       {{"stage1_epochs", c.train.stage1_epochs},
        {"stage2_epochs", c.train.stage2_epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"stage2_learning_rate", c.train.stage2_learning_rate},
        {"patience", c.train.patience},
        {"validation_fraction", c.train.validation_fraction},
        {"frequency_reduction", FrequencyReductionName(c.train.frequency_reduction)},
        {"inconsistency_norm", InconsistencyNormName(c.train.inconsistency_norm)},
        {"use_complex_branch", c.train.use_complex_branch}}},
      {"loss_weights",
       {{"tumor", w.tumor},
        {"structure", w.structure},
        {"frequency", w.frequency},
        {"similarity", w.similarity},
        {"laplacian", w.laplacian},
        {"lpips", w.lpips}}},
      {"mmd", {{"sigmas", c.train.mmd.sigmas}, {"weights", c.train.mmd.weights}}},
      {"segmenter", c.train.segmenter},
      {"phantom",
       {{"n", c.phantom.n},
        {"size", c.phantom.size},
        {"seed", c.phantom.seed},
        {"kinds", kinds},
        {"healthy", c.phantom.healthy}}},
      {"paths",
       {{"manifest", c.paths.manifest},
        {"ratings", c.paths.ratings},
        {"stage1_checkpoint", c.paths.stage1_checkpoint},
        {"model_checkpoint", c.paths.model_checkpoint}}},
  };
}

RunConfig LoadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kNotFound, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    Fail(ErrorKind::kConfig, "config " + path + " is not valid JSON: " + e.what());
  }
  return FromJson(j);
}

void WriteSnapshot(const RunConfig& c, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
  out << ToJson(c).dump(2) << "\n";
}

}  // namespace kcross::config
