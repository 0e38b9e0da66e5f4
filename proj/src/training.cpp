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


#include "kcross/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>

#include "kcross/checkpoint.hpp"
#include "kcross/consistency.hpp"
#include "kcross/errors.hpp"

namespace kcross::training {
namespace {

using ag::Var;
using nlohmann::json;

constexpr double kNoBest = std::numeric_limits<double>::max();

json EpochToJson(const EpochLosses& e) {
  return {{"epoch", e.epoch},           {"frequency", e.frequency},
          {"tumor", e.tumor},           {"structure", e.structure},
          {"similarity", e.similarity}, {"total", e.total},
          {"validation_total", e.validation_total}};
}

EpochLosses EpochFromJson(const json& j) {
  EpochLosses e;
  e.epoch = j.at("epoch");
  e.frequency = j.at("frequency");
  e.tumor = j.at("tumor");
  e.structure = j.at("structure");
  e.similarity = j.at("similarity");
  e.total = j.at("total");
  e.validation_total = j.at("validation_total");
  return e;
}

void AddMoments(ckpt::Checkpoint& c, const std::string& name, nn::Adam& opt) {
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    c.Add("optim." + name + ".m." + std::to_string(i), opt.first_moments()[i]);
    c.Add("optim." + name + ".v." + std::to_string(i), opt.second_moments()[i]);
  }
}

void LoadMoments(const ckpt::Checkpoint& c, const std::string& name, nn::Adam& opt) {
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    for (auto [tag, store] : {std::pair{".m.", &opt.first_moments()},
                              std::pair{".v.", &opt.second_moments()}}) {
      const std::string key = "optim." + name + tag + std::to_string(i);
      const Tensor* t = c.Find(key);
      if (t == nullptr || t->shape() != (*store)[i].shape()) {
        Fail(ErrorKind::kData, "checkpoint lacks optimizer state " + key);
      }
      (*store)[i] = *t;
    }
  }
}

bool OnGrid(double level) {
  const double k = level * 10.0;
  return level >= 0.0 && level <= 0.9 + 1e-12 && std::abs(k - std::round(k)) < 1e-9;
}

}  // namespace

void TrainConfig::Validate() const {
  if (stage1_epochs < 1 || stage2_epochs < 1 || batch_size < 2 || patience < 1) {
    Fail(ErrorKind::kConfig, "train: epochs and patience must be >= 1, batch_size >= 2");
  }
  if (!(learning_rate > 0.0) || !(stage2_learning_rate > 0.0)) {
    Fail(ErrorKind::kConfig, "train: learning rates must be positive");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    Fail(ErrorKind::kConfig, "train: validation_fraction must lie in [0, 1)");
  }
  weights.Validate();
  mmd.Validate();
}

std::vector<std::vector<int>> MakeBatches(const std::vector<int>& order, int batch_size) {
  std::vector<std::vector<int>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + i, order.begin() + end);
  }
  if (batches.size() >= 2 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

std::vector<int> EpochOrder(const std::vector<int>& rows, std::uint64_t seed, int epoch) {
  std::vector<int> order(rows);
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch + 2));
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

struct Stage1Trainer::Prepared {
  const std::vector<PairSample>* samples = nullptr;
  std::vector<std::optional<Image>> patches;
};

Stage1Trainer::Stage1Trainer(model::KCrossModel& model, const TrainConfig& config,
                             const seg::Segmenter& segmenter,
                             const losses::LpipsBackbone& backbone)
    : model_(model), config_(config), segmenter_(segmenter), backbone_(backbone) {
  config_.Validate();
  const nn::AdamOptions opts{config_.learning_rate};
  complex_opt_ = nn::Adam(model_.branches().ComplexTargetState().Trainable(), opts);
  tumor_opt_ = nn::Adam(model_.branches().TumorTargetState().Trainable(), opts);
  structure_opt_ = nn::Adam(model_.branches().StructureState().Trainable(), opts);
  best_validation_ = kNoBest;
}

void Stage1Trainer::CheckFinite(double value, const char* name, int epoch) {
  if (std::isfinite(value)) return;
  std::string where = "no snapshot (no run directory)";
  if (!run_dir_.empty()) {
    const std::string path = run_dir_ + "/nan_snapshot.kcx";
    SaveCheckpoint(path);
    where = "snapshot written to " + path;
  }
  Fail(ErrorKind::kNumerical, std::string("non-finite ") + name + " loss at epoch " +
                                  std::to_string(epoch) + ", step " +
                                  std::to_string(step_) + "; " + where);
}

EpochLosses Stage1Trainer::RunEpoch(const Prepared& data, const std::vector<int>& train,
                                    int epoch, losses::LossLog* log) {
  auto& br = model_.branches();
  const auto& cfg = model_.config();
  const auto& w = config_.weights;
  EpochLosses sums;
  int tumor_batches = 0;
  const auto batches = MakeBatches(EpochOrder(train, config_.seed, epoch), config_.batch_size);
  for (const auto& batch : batches) {
    std::vector<Image> sources, targets, patches;
    for (int i : batch) {
      sources.push_back((*data.samples)[i].source);
      targets.push_back((*data.samples)[i].target);
      if (data.patches[i]) patches.push_back(*data.patches[i]);
    }
    ++step_;

    // Complex branch on the target spectrum.
    complex_opt_.ZeroGrad();
    const cnn::ComplexTensor z = model::KspaceBatch(targets, cfg);
    auto out = br.complex_target.Forward(z, true);
    auto fake = br.complex_target.Encode(out.reconstruction, true);
    std::vector<cnn::ComplexTensor> real_list = {z}, fake_list = {out.reconstruction};
    real_list.insert(real_list.end(), out.features.begin(), out.features.end());
    fake_list.insert(fake_list.end(), fake.begin(), fake.end());
    const Var l_freq = losses::FrequencyLoss(real_list, fake_list, config_.frequency_reduction);
    CheckFinite(l_freq.item(), "frequency", epoch);
    ag::Backward(ag::Scale(l_freq, w.frequency));
    complex_opt_.Step();
    sums.frequency += l_freq.item();
    if (log) log->Record(step_, "frequency", l_freq.item());

    // Tumor branch on lesion patches of the target.
    if (patches.size() >= 2) {
      tumor_opt_.ZeroGrad();
      const Var x = ag::Constant(StackImages(patches));
      const auto t_out = br.tumor_target.Forward(x, true);
      const Var l_tumor = losses::TumorLoss(x, t_out.reconstruction, w, &backbone_);
      CheckFinite(l_tumor.item(), "tumor", epoch);
      ag::Backward(ag::Scale(l_tumor, w.tumor));
      tumor_opt_.Step();
      sums.tumor += l_tumor.item();
      ++tumor_batches;
      if (log) log->Record(step_, "tumor", l_tumor.item());
    }

    // Shared structure branch on (s, t) as one batch.
    structure_opt_.ZeroGrad();
    std::vector<Image> both(sources);
    both.insert(both.end(), targets.begin(), targets.end());
    const Var x = ag::Constant(StackImages(both));
    const auto s_out = br.structure.Forward(x, true);
    const Var l_stru = losses::StructureLoss(x, s_out.reconstruction);
    const Var codes = br.StructureCode(s_out.features);
    const int b = static_cast<int>(batch.size());
    const Var l_sim = losses::SimilarityLoss(ag::SliceRows(codes, 0, b),
                                             ag::SliceRows(codes, b, 2 * b), config_.mmd);
    CheckFinite(l_stru.item(), "structure", epoch);
    CheckFinite(l_sim.item(), "similarity", epoch);
    const Var terms[] = {l_stru, l_sim};
    const double tw[] = {w.structure, w.similarity};
    ag::Backward(ag::WeightedSum(terms, tw));
    structure_opt_.Step();
    sums.structure += l_stru.item();
    sums.similarity += l_sim.item();
    if (log) {
      log->Record(step_, "structure", l_stru.item());
      log->Record(step_, "similarity", l_sim.item());
    }
  }
  const double nb = static_cast<double>(batches.size());
  sums.frequency /= nb;
  sums.structure /= nb;
  sums.similarity /= nb;
  if (tumor_batches > 0) sums.tumor /= tumor_batches;
  sums.total = w.tumor * sums.tumor + w.structure * sums.structure +
               w.frequency * sums.frequency + w.similarity * sums.similarity;
  sums.epoch = epoch;
  return sums;
}

EpochLosses Stage1Trainer::Evaluate(const Prepared& data, const std::vector<int>& rows) {
  ag::NoGradGuard no_grad;
  auto& br = model_.branches();
  const auto& cfg = model_.config();
  const auto& w = config_.weights;
  EpochLosses sums;
  int tumor_batches = 0;
  const auto batches = MakeBatches(rows, config_.batch_size);
  for (const auto& batch : batches) {
    std::vector<Image> sources, targets, patches;
    for (int i : batch) {
      sources.push_back((*data.samples)[i].source);
      targets.push_back((*data.samples)[i].target);
      if (data.patches[i]) patches.push_back(*data.patches[i]);
    }
    const cnn::ComplexTensor z = model::KspaceBatch(targets, cfg);
    auto out = br.complex_target.Forward(z, false);
    auto fake = br.complex_target.Encode(out.reconstruction, false);
    std::vector<cnn::ComplexTensor> real_list = {z}, fake_list = {out.reconstruction};
    real_list.insert(real_list.end(), out.features.begin(), out.features.end());
    fake_list.insert(fake_list.end(), fake.begin(), fake.end());
    sums.frequency +=
        losses::FrequencyLoss(real_list, fake_list, config_.frequency_reduction).item();
    if (!patches.empty()) {
      const Var x = ag::Constant(StackImages(patches));
      const auto t_out = br.tumor_target.Forward(x, false);
      sums.tumor += losses::TumorLoss(x, t_out.reconstruction, w, &backbone_).item();
      ++tumor_batches;
    }
    std::vector<Image> both(sources);
    both.insert(both.end(), targets.begin(), targets.end());
    const Var x = ag::Constant(StackImages(both));
    const auto s_out = br.structure.Forward(x, false);
    sums.structure += losses::StructureLoss(x, s_out.reconstruction).item();
    const Var codes = br.StructureCode(s_out.features);
    const int b = static_cast<int>(batch.size());
    sums.similarity += losses::SimilarityLoss(ag::SliceRows(codes, 0, b),
                                              ag::SliceRows(codes, b, 2 * b), config_.mmd)
                           .item();
  }
  const double nb = static_cast<double>(batches.size());
  sums.frequency /= nb;
  sums.structure /= nb;
  sums.similarity /= nb;
  if (tumor_batches > 0) sums.tumor /= tumor_batches;
  sums.total = w.tumor * sums.tumor + w.structure * sums.structure +
               w.frequency * sums.frequency + w.similarity * sums.similarity;
  return sums;
}

Stage1Result Stage1Trainer::Run(const std::vector<PairSample>& data,
                                const std::string& run_dir,
                                std::optional<int> stop_after_epoch) {
  if (data.empty()) Fail(ErrorKind::kConfig, "stage 1: empty dataset");
  run_dir_ = run_dir;
  Prepared prepared;
  prepared.samples = &data;
  for (const auto& s : data) {
    if (!s.source.SameShape(s.target)) {
      Fail(ErrorKind::kData, "stage 1: pair " + s.id + " is not aligned");
    }
    if (s.healthy) {
      prepared.patches.emplace_back();
      continue;
    }
    const seg::LesionMask mask = segmenter_.Segment(s.target);
    if (mask.empty()) {
      prepared.patches.emplace_back();
    } else {
      prepared.patches.emplace_back(
          seg::ExtractLesionPatch(s.target, mask, model_.config().patch_size));
    }
  }
  std::vector<int> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  const std::vector<int> split = EpochOrder(all, config_.seed, -1);
  int n_val = static_cast<int>(std::floor(config_.validation_fraction * data.size()));
  if (n_val < 2 || static_cast<int>(data.size()) - n_val < 2) n_val = 0;
  const std::vector<int> train(split.begin(), split.end() - n_val);
  const std::vector<int> val(split.end() - n_val, split.end());

  std::optional<losses::LossLog> log;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    log.emplace(run_dir + "/stage1_losses.jsonl");
  }
  while (!stopped_ && completed_epochs_ < config_.stage1_epochs) {
    if (stop_after_epoch && completed_epochs_ >= *stop_after_epoch) break;
    const int epoch = completed_epochs_;
    EpochLosses e = RunEpoch(prepared, train, epoch, log ? &*log : nullptr);
    e.validation_total = val.empty() ? e.total : Evaluate(prepared, val).total;
    history_.push_back(e);
    ++completed_epochs_;
    if (e.validation_total < best_validation_) {
      best_validation_ = e.validation_total;
      bad_epochs_ = 0;
    } else if (++bad_epochs_ >= config_.patience) {
      stopped_ = true;
    }
    if (log) log->Record(epoch, "epoch_total", e.total);
    if (log) log->Record(epoch, "epoch_validation_total", e.validation_total);
    if (!run_dir.empty()) SaveCheckpoint(run_dir + "/stage1_last.kcx");
  }
  model_.stage1_trained = true;
  Stage1Result result;
  result.history = history_;
  result.epochs_run = completed_epochs_;
  result.early_stopped = stopped_;
  return result;
}

void Stage1Trainer::SaveCheckpoint(const std::string& path) {
  ckpt::Checkpoint c;
  c.AddState(model_.branches().State());
  AddMoments(c, "complex", complex_opt_);
  AddMoments(c, "tumor", tumor_opt_);
  AddMoments(c, "structure", structure_opt_);
  json history = json::array();
  for (const auto& e : history_) history.push_back(EpochToJson(e));
  c.metadata = {{"kind", "stage1_trainer"},
                {"model_config", ModelConfigToJson(model_.config())},
                {"seed", config_.seed},
                {"completed_epochs", completed_epochs_},
                {"best_validation", best_validation_},
                {"bad_epochs", bad_epochs_},
                {"stopped", stopped_},
                {"step", step_},
                {"adam_steps",
                 {{"complex", complex_opt_.steps()},
                  {"tumor", tumor_opt_.steps()},
                  {"structure", structure_opt_.steps()}}},
                {"history", history}};
  ckpt::Write(path, c);
}

void Stage1Trainer::LoadCheckpoint(const std::string& path) {
  const ckpt::Checkpoint c = ckpt::Read(path);
  if (c.metadata.value("kind", "") != "stage1_trainer") {
    Fail(ErrorKind::kData, path + " is not a stage-1 trainer checkpoint");
  }
  nn::StateDict sd = model_.branches().State();
  ckpt::LoadState(c, sd);
  LoadMoments(c, "complex", complex_opt_);
  LoadMoments(c, "tumor", tumor_opt_);
  LoadMoments(c, "structure", structure_opt_);
  const json& m = c.metadata;
  completed_epochs_ = m.at("completed_epochs");
  best_validation_ = m.at("best_validation");
  bad_epochs_ = m.at("bad_epochs");
  stopped_ = m.at("stopped");
  step_ = m.at("step");
  complex_opt_.set_steps(m.at("adam_steps").at("complex"));
  tumor_opt_.set_steps(m.at("adam_steps").at("tumor"));
  structure_opt_.set_steps(m.at("adam_steps").at("structure"));
  history_.clear();
  for (const auto& e : m.at("history")) history_.push_back(EpochFromJson(e));
}

Stage2Result TrainStage2(model::KCrossModel& model, const model::Codes& codes,
                         const std::vector<double>& ratings, const TrainConfig& config,
                         losses::LossLog* log) {
  config.Validate();
  const int n = static_cast<int>(ratings.size());
  if (n == 0) Fail(ErrorKind::kData, "stage 2: no rated images");
  if (codes.structure.shape()[0] != n) {
    Fail(ErrorKind::kShape, "stage 2: " + std::to_string(n) + " ratings for " +
                                std::to_string(codes.structure.shape()[0]) + " images");
  }
  for (double r : ratings) {
    if (!OnGrid(r)) {
      Fail(ErrorKind::kValidation,
           "stage 2: rating " + std::to_string(r) + " is not on the 10-level grid");
    }
  }
  model.options.use_complex = config.use_complex_branch;
  std::vector<Var> params = model.nets().NaturalState().Trainable();
  if (config.use_complex_branch) {
    for (const Var& p : model.nets().ComplexState().Trainable()) params.push_back(p);
  }
  nn::Adam opt(params, nn::AdamOptions{config.stage2_learning_rate});
  const Var ref = ag::Constant(Tensor({n, 1}, ratings));
  auto current = [&] {
    ag::NoGradGuard no_grad;
    const Tensor& t = model.ScoreCodes(codes).total.value();
    return consistency::RankInconsistency(ratings, t.storage(),
                                          consistency::Direction::kHigherIsBetter);
  };
  Stage2Result result;
  result.initial_inconsistency = current();
  const int steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const int steps = config.stage2_epochs * steps_per_epoch;
  for (int s = 0; s < steps; ++s) {
    opt.ZeroGrad();
    const Var total = model.ScoreCodes(codes).total;
    const std::vector<double> aligned = consistency::Uniformize(
        ratings, total.value().storage(), consistency::Direction::kHigherIsBetter);
    const Var st = ag::StraightThrough(total, Tensor({n, 1}, aligned));
    const Var loss =
        losses::Stage2Total(losses::InconsistencyLoss(st, ref, config.inconsistency_norm));
    if (!std::isfinite(loss.item())) {
      Fail(ErrorKind::kNumerical, "stage 2: non-finite loss at step " + std::to_string(s));
    }
    ag::Backward(loss);
    opt.Step();
    result.history.push_back(loss.item());
    if (log) log->Record(s, "inconsistency", loss.item());
  }
  result.final_inconsistency = current();
  model.stage2_trained = true;
  return result;
}

void RequireRatings(const std::vector<std::string>& ids,
                    const std::vector<std::optional<double>>& ratings) {
  std::string missing;
  int count = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i < ratings.size() && ratings[i]) continue;
    missing += (missing.empty() ? "" : ", ") + ids[i];
    ++count;
  }
  if (count > 0) {
    Fail(ErrorKind::kData, "missing ratings for " + std::to_string(count) +
                               " image(s): " + missing);
  }
}

json ModelConfigToJson(const model::ModelConfig& c) {
  return {{"depth", c.unet.depth},
          {"base_channels", c.unet.base_channels},
          {"kernel", c.unet.kernel},
          {"stride", c.unet.stride},
          {"padding", c.unet.padding},
          {"leaky_slope", c.unet.leaky_slope},
          {"code_dim", c.code_dim},
          {"hidden", c.hidden},
          {"patch_size", c.patch_size},
          {"kspace_input", model::KspaceInputName(c.kspace_input)},
          {"kspace_floor", c.kspace_floor},
          {"kspace_gain", c.kspace_gain},
          {"combine", model::CodeCombineName(c.combine)}};
}

model::ModelConfig ModelConfigFromJson(const json& j) {
  model::ModelConfig c;
  static const char* kKeys[] = {"depth",      "base_channels", "kernel",       "stride",
                                "padding",    "leaky_slope",   "code_dim",     "hidden",
                                "patch_size", "kspace_input",  "kspace_floor", "kspace_gain",
                                "combine"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys),
                     [&](const char* k) { return key == k; }) == std::end(kKeys)) {
      Fail(ErrorKind::kConfig, "unknown key model." + key);
    }
  }
  try {
    c.unet.depth = j.value("depth", c.unet.depth);
    c.unet.base_channels = j.value("base_channels", c.unet.base_channels);
    c.unet.kernel = j.value("kernel", c.unet.kernel);
    c.unet.stride = j.value("stride", c.unet.stride);
    c.unet.padding = j.value("padding", c.unet.padding);
    c.unet.leaky_slope = j.value("leaky_slope", c.unet.leaky_slope);
    c.code_dim = j.value("code_dim", c.code_dim);
    c.hidden = j.value("hidden", c.hidden);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.kspace_input = model::ParseKspaceInput(
        j.value("kspace_input", model::KspaceInputName(c.kspace_input)));
    c.kspace_floor = j.value("kspace_floor", c.kspace_floor);
    c.kspace_gain = j.value("kspace_gain", c.kspace_gain);
    c.combine = model::ParseCodeCombine(j.value("combine", model::CodeCombineName(c.combine)));
  } catch (const json::exception& e) {
    Fail(ErrorKind::kConfig, std::string("model config: ") + e.what());
  }
  c.Validate();
  return c;
}

void SaveModel(const std::string& path, model::KCrossModel& model, const json& extra) {
  ckpt::Checkpoint c;
  c.AddState(model.State());
  c.metadata = {{"kind", "model"},
                {"model_config", ModelConfigToJson(model.config())},
                {"stage1_trained", model.stage1_trained},
                {"stage2_trained", model.stage2_trained},
                {"options",
                 {{"use_complex", model.options.use_complex},
                  {"use_natural", model.options.use_natural}}},
                {"extra", extra}};
  ckpt::Write(path, c);
}

model::ModelConfig ModelConfigFromCheckpoint(const std::string& path) {
  const ckpt::Checkpoint c = ckpt::Read(path);
  if (!c.metadata.contains("model_config")) {
    Fail(ErrorKind::kData, path + " carries no model configuration");
  }
  return ModelConfigFromJson(c.metadata.at("model_config"));
}

void LoadModel(const std::string& path, model::KCrossModel& model) {
  const ckpt::Checkpoint c = ckpt::Read(path);
  const std::string kind = c.metadata.value("kind", "");
  if (kind == "stage1_trainer") {
    nn::StateDict sd = model.branches().State();
    ckpt::LoadState(c, sd);
    model.stage1_trained = true;
    return;
  }
  if (kind != "model") Fail(ErrorKind::kData, path + " is not a model checkpoint");
  nn::StateDict sd = model.State();
  ckpt::LoadState(c, sd);
  model.stage1_trained = c.metadata.value("stage1_trained", false);
  model.stage2_trained = c.metadata.value("stage2_trained", false);
  const json opts = c.metadata.value("options", json::object());
  model.options.use_complex = opts.value("use_complex", true);
  model.options.use_natural = opts.value("use_natural", true);
}

}  // namespace kcross::training
