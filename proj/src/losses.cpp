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


#include "kcross/losses.hpp"

#include <cmath>

#include "json.hpp"
#include "kcross/errors.hpp"

namespace kcross::losses {

void LossWeights::Validate() const {
  for (double w : {tumor, structure, frequency, similarity, laplacian, lpips}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      Fail(ErrorKind::kConfig, "loss weights must be finite and nonnegative");
    }
  }
}

void MmdKernelBank::Validate() const {
  if (sigmas.empty() || sigmas.size() != weights.size()) {
    Fail(ErrorKind::kConfig, "MMD kernel bank: sigmas and weights must be "
                             "nonempty and of equal length");
  }
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > 0.0) || !(weights[i] > 0.0)) {
      Fail(ErrorKind::kConfig, "MMD kernel bank entries must be positive");
    }
  }
}

std::vector<double> MmdKernelBank::NormalizedWeights() const {
  double total = 0.0;
  for (double w : weights) total += w;
  std::vector<double> out;
  for (double w : weights) out.push_back(w / total);
  return out;
}

Var FrequencyLoss(const std::vector<cnn::ComplexTensor>& real,
                  const std::vector<cnn::ComplexTensor>& fake,
                  FrequencyReduction reduction) {
  if (real.size() != fake.size() || real.empty()) {
    Fail(ErrorKind::kShape, "frequency loss: feature lists differ in length (" +
                                std::to_string(real.size()) + " vs " +
                                std::to_string(fake.size()) + ")");
  }
  std::vector<Var> terms;
  for (std::size_t l = 0; l < real.size(); ++l) {
    if (real[l].shape() != fake[l].shape()) {
      Fail(ErrorKind::kShape, "frequency loss: layer " + std::to_string(l) +
                                  " shapes " + ShapeString(real[l].shape()) +
                                  " vs " + ShapeString(fake[l].shape()));
    }
    Var d = ag::Add(ag::Square(ag::Sub(real[l].re, fake[l].re)),
                    ag::Square(ag::Sub(real[l].im, fake[l].im)));
    Var term = ag::Mean(d);
    if (reduction == FrequencyReduction::kSpatialMean && real[l].shape().size() == 4) {
      term = ag::Scale(term, real[l].shape()[1]);
    }
    terms.push_back(term);
  }
  const std::vector<double> ones(terms.size(), 1.0);
  return ag::WeightedSum(terms, ones);
}

Var SimilarityLoss(const Var& h_src, const Var& h_tgt, const MmdKernelBank& bank) {
  bank.Validate();
  if (h_src.shape().empty() || h_tgt.shape().empty() || h_src.shape()[0] == 0 ||
      h_tgt.shape()[0] == 0) {
    Fail(ErrorKind::kInvalidArgument, "similarity loss: empty batch");
  }
  const std::vector<double> w = bank.NormalizedWeights();
  return ag::Mmd2(h_src, h_tgt, bank.sigmas, w);
}

LpipsBackbone::LpipsBackbone(std::uint64_t seed, int width) {
  std::mt19937_64 rng(seed);
  const int channels[] = {1, width, 2 * width, 4 * width, 4 * width};
  for (int i = 0; i < 4; ++i) {
    nn::Conv2dLayer conv(channels[i], channels[i + 1], 3, {i == 0 ? 1 : 2, 1}, rng);
    conv.weight = ag::Constant(conv.weight.value());
    conv.bias = ag::Constant(Tensor::Randn({channels[i + 1]}, rng, 0.1));
    convs_.push_back(std::move(conv));
  }
}

std::vector<Var> LpipsBackbone::Features(const Var& x) const {
  std::vector<Var> out;
  Var h = x;
  for (const auto& conv : convs_) {
    h = ag::Relu(conv.Forward(h));
    out.push_back(h);
  }
  return out;
}

std::uint64_t LpipsBackbone::Checksum() const {
  std::uint64_t h = Fnv1a(nullptr, 0);
  for (const auto& conv : convs_) {
    const Tensor& w = conv.weight.value();
    const Tensor& b = conv.bias.value();
    h = Fnv1a(w.data(), w.numel() * sizeof(double), h);
    h = Fnv1a(b.data(), b.numel() * sizeof(double), h);
  }
  return h;
}

Var LpipsLoss(const Var& x, const Var& x_hat, const LpipsBackbone& backbone) {
  const std::vector<Var> fx = backbone.Features(x);
  const std::vector<Var> fy = backbone.Features(x_hat);
  std::vector<Var> terms;
  for (std::size_t k = 0; k < fx.size(); ++k) {
    terms.push_back(ag::Mean(ag::Square(ag::Sub(ag::ChannelUnitNormalize(fx[k]),
                                                ag::ChannelUnitNormalize(fy[k])))));
  }
  const std::vector<double> w(terms.size(), 1.0 / terms.size());
  return ag::WeightedSum(terms, w);
}

Var LaplacianLoss(const Var& x, const Var& x_hat) {
  if (x.shape() != x_hat.shape()) {
    Fail(ErrorKind::kShape, "laplacian loss: " + ShapeString(x.shape()) + " vs " +
                                ShapeString(x_hat.shape()));
  }
  return ag::Mean(
      ag::Square(ag::Sub(ag::LaplacianReplicate(x), ag::LaplacianReplicate(x_hat))));
}

Var TumorLoss(const Var& x, const Var& x_hat, const LossWeights& weights,
              const LpipsBackbone* backbone) {
  if (backbone == nullptr) {
    Fail(ErrorKind::kConfig, "tumor loss: no perceptual backbone registered");
  }
  const Var terms[] = {LaplacianLoss(x, x_hat), LpipsLoss(x, x_hat, *backbone)};
  const double w[] = {weights.laplacian, weights.lpips};
  return ag::WeightedSum(terms, w);
}

Var StructureLoss(const Var& x, const Var& x_hat) {
  if (x.shape() != x_hat.shape()) {
    Fail(ErrorKind::kShape, "structure loss: " + ShapeString(x.shape()) + " vs " +
                                ShapeString(x_hat.shape()));
  }
  return ag::Mean(ag::Abs(ag::Sub(x, x_hat)));
}

Var InconsistencyLoss(const Var& eta_total, const Var& eta_ra,
                      InconsistencyNorm norm) {
  if (eta_total.shape() != eta_ra.shape()) {
    Fail(ErrorKind::kShape, "inconsistency loss: " + ShapeString(eta_total.shape()) +
                                " vs " + ShapeString(eta_ra.shape()));
  }
  for (const Var* v : {&eta_total, &eta_ra}) {
    for (double e : v->value().values()) {
      if (!(e >= 0.0 && e <= 1.0)) {
        Fail(ErrorKind::kInvalidArgument,
             "inconsistency loss: score " + std::to_string(e) +
                 " is outside [0, 1]; rank-align before comparing");
      }
    }
  }
  Var d = ag::Sub(eta_total, eta_ra);
  return ag::Mean(norm == InconsistencyNorm::kL1 ? ag::Abs(d) : ag::Square(d));
}

Var Stage1Total(const Stage1Parts& parts, const LossWeights& weights) {
  const Var terms[] = {parts.tumor, parts.structure, parts.frequency,
                       parts.similarity};
  const double w[] = {weights.tumor, weights.structure, weights.frequency,
                      weights.similarity};
  return ag::WeightedSum(terms, w);
}

Var Stage2Total(const Var& inconsistency) { return inconsistency; }

LossLog::LossLog(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) Fail(ErrorKind::kIo, "cannot open loss log " + path);
}

void LossLog::Record(long step, const std::string& name, double value) {
  if (!out_.is_open()) return;
  nlohmann::json j = {{"step", step}, {"loss_name", name}, {"value", value}};
  out_ << j.dump() << '\n';
  out_.flush();
}

}  // namespace kcross::losses
