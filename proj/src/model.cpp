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


#include "kcross/model.hpp"

#include <cmath>

#include "kcross/errors.hpp"
#include "kcross/kspace.hpp"

namespace kcross::model {
namespace {

constexpr int kEncodeChunk = 32;

Tensor RandomProjection(int out, int in, std::mt19937_64& rng) {
  return Tensor::Randn({out, in}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
}

nn::UNetSpec PatchSpec(const ModelConfig& c) { return c.unet; }

double RowNorm(const Tensor& t, int row) {
  if (t.empty()) return 0.0;
  const int d = t.shape()[1];
  double s = 0.0;
  for (int j = 0; j < d; ++j) s += t[static_cast<std::size_t>(row) * d + j] * t[static_cast<std::size_t>(row) * d + j];
  return std::sqrt(s);
}

// Copies rows [begin, begin + rows.dim(0)) of `dst` from `rows`.
void PlaceRows(Tensor& dst, const Tensor& rows, int begin) {
  std::copy(rows.data(), rows.data() + rows.numel(),
            dst.data() + static_cast<std::size_t>(begin) * dst.shape()[1]);
}

}  // namespace

void ModelConfig::Validate() const {
  if (unet.depth < 1 || unet.base_channels < 1 || unet.kernel < 1 || unet.stride < 1 ||
      unet.padding < 0) {
    Fail(ErrorKind::kConfig, "model.unet: depth, base_channels, kernel, stride must be "
                             ">= 1 and padding >= 0");
  }
  if (code_dim < 1 || hidden < 1) Fail(ErrorKind::kConfig, "code_dim and hidden must be >= 1");
  if (!(kspace_floor > 0.0) || !(kspace_gain > 0.0)) {
    Fail(ErrorKind::kConfig, "kspace_floor and kspace_gain must be positive");
  }
  nn::CheckUNetInput(unet, patch_size, patch_size);
}

std::string KspaceInputName(KspaceInput k) {
  return k == KspaceInput::kLogCompressed ? "log_compressed" : "linear";
}

KspaceInput ParseKspaceInput(const std::string& name) {
  if (name == "log_compressed") return KspaceInput::kLogCompressed;
  if (name == "linear") return KspaceInput::kLinear;
  Fail(ErrorKind::kConfig, "unknown kspace_input '" + name + "'");
}

std::string CodeCombineName(CodeCombine c) {
  return c == CodeCombine::kSum ? "sum" : "concat";
}

CodeCombine ParseCodeCombine(const std::string& name) {
  if (name == "sum") return CodeCombine::kSum;
  if (name == "concat") return CodeCombine::kConcat;
  Fail(ErrorKind::kConfig, "unknown code combine mode '" + name + "'");
}

cnn::ComplexTensor KspaceBatch(std::span<const Image> images, const ModelConfig& config) {
  if (images.empty()) Fail(ErrorKind::kInvalidArgument, "empty image batch");
  const int m = images[0].rows, n = images[0].cols;
  const int b = static_cast<int>(images.size());
  Tensor re({b, 1, m, n}), im({b, 1, m, n});
  const std::size_t plane = static_cast<std::size_t>(m) * n;
  const double norm = 1.0 / static_cast<double>(plane);
  const double log_scale = 1.0 / std::log1p(1.0 / config.kspace_floor);
  for (int i = 0; i < b; ++i) {
    if (images[i].rows != m || images[i].cols != n) {
      Fail(ErrorKind::kShape, "images in a batch must share a shape");
    }
    const KSpaceImage k = ForwardKSpace(images[i]);
    for (std::size_t p = 0; p < plane; ++p) {
      Complex z = k.values[p] * norm;
      if (config.kspace_input == KspaceInput::kLogCompressed) {
        const double mag = std::abs(z);
        z = mag > 0.0 ? z * (std::log1p(mag / config.kspace_floor) * log_scale / mag)
                      : Complex(0.0, 0.0);
      } else {
        z *= config.kspace_gain;
      }
      re[i * plane + p] = z.real();
      im[i * plane + p] = z.imag();
    }
  }
  return cnn::ComplexTensor::Constant(std::move(re), std::move(im));
}

BranchSet::BranchSet(const ModelConfig& config, std::mt19937_64& rng)
    : tumor_target(PatchSpec(config), rng),
      tumor_source(PatchSpec(config), rng),
      complex_target(config.unet, rng),
      complex_source(config.unet, rng),
      structure(config.unet, rng) {
  const int width = config.unet.PooledWidth();
  proj_tumor = RandomProjection(config.code_dim, width, rng);
  proj_structure = RandomProjection(config.code_dim, width, rng);
  proj_complex = RandomProjection(config.code_dim, width, rng);
}

nn::StateDict BranchSet::ComplexTargetState() {
  nn::StateDict sd;
  complex_target.CollectEncoder("complex_target.enc", sd);
  complex_target.CollectDecoder("complex_target.dec", sd);
  return sd;
}

nn::StateDict BranchSet::TumorTargetState() {
  nn::StateDict sd;
  tumor_target.CollectEncoder("tumor_target.enc", sd);
  tumor_target.CollectDecoder("tumor_target.dec", sd);
  return sd;
}

nn::StateDict BranchSet::StructureState() {
  nn::StateDict sd;
  structure.CollectEncoder("structure.enc", sd);
  structure.CollectDecoder("structure.dec", sd);
  return sd;
}

nn::StateDict BranchSet::SourcePrivateState() {
  nn::StateDict sd;
  tumor_source.CollectEncoder("tumor_source.enc", sd);
  tumor_source.CollectDecoder("tumor_source.dec", sd);
  complex_source.CollectEncoder("complex_source.enc", sd);
  complex_source.CollectDecoder("complex_source.dec", sd);
  return sd;
}

nn::StateDict BranchSet::ProjectionState() {
  nn::StateDict sd;
  sd.AddBuffer("proj.tumor", proj_tumor);
  sd.AddBuffer("proj.structure", proj_structure);
  sd.AddBuffer("proj.complex", proj_complex);
  return sd;
}

nn::StateDict BranchSet::State() {
  nn::StateDict sd;
  sd.Append(ComplexTargetState());
  sd.Append(TumorTargetState());
  sd.Append(StructureState());
  sd.Append(SourcePrivateState());
  sd.Append(ProjectionState());
  return sd;
}

Var BranchSet::TumorCode(const std::vector<Var>& features) const {
  return ag::Linear(nn::PoolFeatures(features), ag::Constant(proj_tumor), Var());
}

Var BranchSet::StructureCode(const std::vector<Var>& features) const {
  return ag::Linear(nn::PoolFeatures(features), ag::Constant(proj_structure), Var());
}

cnn::ComplexTensor BranchSet::ComplexCode(
    const std::vector<cnn::ComplexTensor>& features) const {
  const cnn::ComplexTensor pooled = cnn::PoolComplexFeatures(features);
  const Var p = ag::Constant(proj_complex);
  return {ag::Linear(pooled.re, p, Var()), ag::Linear(pooled.im, p, Var())};
}

ScoreNets::ScoreNets(const ModelConfig& config, std::mt19937_64& rng) {
  const int nat_in =
      config.combine == CodeCombine::kConcat ? 2 * config.code_dim : config.code_dim;
  nat1 = nn::LinearLayer(nat_in, config.hidden, rng);
  nat2 = nn::LinearLayer(config.hidden, 1, rng, 1.0);
  c1 = cnn::InitComplexLinear(config.code_dim, config.hidden, rng, 2.0);
  c2 = cnn::InitComplexLinear(config.hidden, 1, rng, 1.0);
}

Var ScoreNets::Natural(const Var& code) const {
  return nat2.Forward(ag::Relu(nat1.Forward(code)));
}

Var ScoreNets::ComplexScore(const cnn::ComplexTensor& code) const {
  cnn::ComplexTensor h = cnn::ComplexLinear(code, c1);
  h = cnn::ComplexActivation(h, cnn::Activation::kRelu);
  h = cnn::ComplexLinear(h, c2);
  return ag::Modulus(h.re, h.im);
}

nn::StateDict ScoreNets::NaturalState() {
  nn::StateDict sd;
  nat1.Collect("n_nat.fc1", sd);
  nat2.Collect("n_nat.fc2", sd);
  return sd;
}

nn::StateDict ScoreNets::ComplexState() {
  nn::StateDict sd;
  cnn::CollectWeights("n_c.fc1", c1, sd);
  cnn::CollectWeights("n_c.fc2", c2, sd);
  return sd;
}

nn::StateDict ScoreNets::State() {
  nn::StateDict sd;
  sd.Append(NaturalState());
  sd.Append(ComplexState());
  return sd;
}

nlohmann::json ScoreReport::ToJson() const {
  return {{"eta_complex", eta_complex},
          {"eta_nat", eta_nat},
          {"eta_total", eta_total},
          {"rank_aligned", rank_aligned},
          {"health_path", health_path},
          {"features",
           {{"tumor_code_norm", tumor_code_norm},
            {"structure_code_norm", structure_code_norm},
            {"complex_code_norm", complex_code_norm},
            {"lesion_coverage", lesion_coverage}}}};
}

double QuantizeScore(double v) {
  constexpr double kGrid = 68719476736.0;  // 2^36
  return std::nearbyint(v * kGrid) / kGrid;
}

KCrossModel::KCrossModel(const ModelConfig& config, std::uint64_t seed)
    : config_((config.Validate(), config)),
      branches_(config_, *std::make_unique<std::mt19937_64>(seed)),
      nets_(config_, *std::make_unique<std::mt19937_64>(seed ^ 0x5c0e5u)) {}

Codes KCrossModel::Encode(std::span<const Image> images, const std::vector<bool>& healthy,
                          const seg::Segmenter* segmenter) {
  if (images.size() != healthy.size()) {
    Fail(ErrorKind::kInvalidArgument, "one health flag per image is required");
  }
  const int b = static_cast<int>(images.size());
  const int d = config_.code_dim;
  Codes codes;
  codes.tumor = Tensor({b, d});
  codes.structure = Tensor({b, d});
  codes.complex_re = Tensor({b, d});
  codes.complex_im = Tensor({b, d});
  codes.healthy = healthy;
  codes.lesion_coverage.assign(b, 0.0);
  ag::NoGradGuard no_grad;

  std::vector<Image> patches;
  std::vector<int> lesion_rows;
  for (int i = 0; i < b; ++i) {
    if (healthy[i]) continue;
    if (segmenter == nullptr) {
      Fail(ErrorKind::kConfig, "lesion-path scoring needs a segmenter backend");
    }
    const seg::LesionMask mask = segmenter->Segment(images[i]);
    codes.lesion_coverage[i] = mask.coverage();
    patches.push_back(seg::ExtractLesionPatch(images[i], mask, config_.patch_size));
    lesion_rows.push_back(i);
  }
  for (std::size_t begin = 0; begin < patches.size(); begin += kEncodeChunk) {
    const std::size_t end = std::min(patches.size(), begin + kEncodeChunk);
    const std::span<const Image> chunk(patches.data() + begin, end - begin);
    const Var x = ag::Constant(StackImages(chunk));
    const Tensor code = branches_.TumorCode(branches_.tumor_target.Encode(x, false)).value();
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      const int row = lesion_rows[begin + r];
      std::copy(code.data() + r * d, code.data() + (r + 1) * d,
                codes.tumor.data() + static_cast<std::size_t>(row) * d);
    }
  }
  for (int begin = 0; begin < b; begin += kEncodeChunk) {
    const int end = std::min(b, begin + kEncodeChunk);
    const std::span<const Image> chunk = images.subspan(begin, end - begin);
    const Var x = ag::Constant(StackImages(chunk));
    PlaceRows(codes.structure,
              branches_.StructureCode(branches_.structure.Encode(x, false)).value(), begin);
    const cnn::ComplexTensor z = KspaceBatch(chunk, config_);
    const cnn::ComplexTensor c =
        branches_.ComplexCode(branches_.complex_target.Encode(z, false));
    PlaceRows(codes.complex_re, c.re.value(), begin);
    PlaceRows(codes.complex_im, c.im.value(), begin);
  }
  return codes;
}

KCrossModel::Heads KCrossModel::ScoreCodes(const Codes& codes) const {
  const int b = codes.structure.shape()[0];
  if (codes.structure.shape()[1] != config_.code_dim) {
    Fail(ErrorKind::kShape, "code width " + std::to_string(codes.structure.shape()[1]) +
                                " differs from the configured " +
                                std::to_string(config_.code_dim));
  }
  Heads h;
  const Tensor zeros({b, 1});
  if (options.use_natural) {
    Var input;
    if (config_.combine == CodeCombine::kSum) {
      input = ag::Add(ag::Constant(codes.tumor), ag::Constant(codes.structure));
    } else {
      const Var parts[] = {ag::Constant(codes.tumor), ag::Constant(codes.structure)};
      input = ag::Concat(parts);
    }
    h.nat = nets_.Natural(input);
  } else {
    h.nat = ag::Constant(zeros);
  }
  if (options.use_complex) {
    h.complex = nets_.ComplexScore(
        {ag::Constant(codes.complex_re), ag::Constant(codes.complex_im)});
  } else {
    h.complex = ag::Constant(zeros);
  }
  h.total = ag::Add(h.nat, h.complex);
  return h;
}

std::vector<ScoreReport> KCrossModel::ScoreBatch(std::span<const Image> images,
                                                 const std::vector<bool>& healthy,
                                                 const seg::Segmenter* segmenter) {
  if (!stage1_trained || !stage2_trained) {
    Fail(ErrorKind::kState, std::string("model is not trained: ") +
                                (!stage1_trained ? "stage-1 branches" : "stage-2 score networks") +
                                " missing");
  }
  const Codes codes = Encode(images, healthy, segmenter);
  ag::NoGradGuard no_grad;
  const Heads heads = ScoreCodes(codes);
  std::vector<ScoreReport> reports(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    ScoreReport& r = reports[i];
    r.eta_nat = QuantizeScore(heads.nat.value()[i]);
    r.eta_complex = QuantizeScore(heads.complex.value()[i]);
    r.eta_total = r.eta_nat + r.eta_complex;
    r.health_path = healthy[i];
    r.tumor_code_norm = RowNorm(codes.tumor, static_cast<int>(i));
    r.structure_code_norm = RowNorm(codes.structure, static_cast<int>(i));
    r.complex_code_norm = std::hypot(RowNorm(codes.complex_re, static_cast<int>(i)),
                                     RowNorm(codes.complex_im, static_cast<int>(i)));
    r.lesion_coverage = codes.lesion_coverage[i];
  }
  return reports;
}

ScoreReport KCrossModel::Score(const Image& t_hat, const seg::Segmenter* segmenter,
                               bool healthy) {
  return ScoreBatch(std::span<const Image>(&t_hat, 1), {healthy}, segmenter).front();
}

nn::StateDict KCrossModel::State() {
  nn::StateDict sd = branches_.State();
  sd.Append(nets_.State());
  return sd;
}

}  // namespace kcross::model
