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


#include "kcross/evaluation.hpp"

#include <algorithm>
#include <set>

#include "kcross/errors.hpp"

namespace kcross::eval {

ScoreTable ScoreAll(const std::vector<EvalItem>& items, model::KCrossModel* model,
                    const seg::Segmenter* segmenter) {
  ScoreTable table;
  for (const auto& item : items) {
    if (!item.target.SameShape(item.synthesized)) {
      Fail(ErrorKind::kShape, "item " + item.id + ": target and synthesized differ in size");
    }
    table["mae"].push_back(consistency::Mae(item.target, item.synthesized));
    table["psnr"].push_back(consistency::Psnr(item.target, item.synthesized));
    table["ssim"].push_back(consistency::Ssim(item.target, item.synthesized));
  }
  if (model != nullptr && !items.empty()) {
    std::vector<Image> images;
    std::vector<bool> healthy;
    for (const auto& item : items) {
      images.push_back(item.synthesized);
      healthy.push_back(item.healthy);
    }
    const model::Codes codes = model->Encode(images, healthy, segmenter);
    ag::NoGradGuard no_grad;
    table["kcross"] = model->ScoreCodes(codes).total.value().storage();
  }
  return table;
}

SubsetResult Compare(const std::vector<EvalItem>& items, const ScoreTable& scores,
                     const std::string& name, const std::vector<std::string>& groups) {
  SubsetResult r;
  r.subset = name;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (groups.empty() ||
        std::find(groups.begin(), groups.end(), items[i].group) != groups.end()) {
      rows.push_back(i);
    }
  }
  r.n = static_cast<int>(rows.size());
  if (rows.empty()) return r;
  std::vector<double> ref;
  for (auto i : rows) ref.push_back(items[i].reference);
  for (const auto& info : consistency::MetricRegistry()) {
    auto it = scores.find(info.name);
    if (it == scores.end()) continue;
    if (it->second.size() != items.size()) {
      Fail(ErrorKind::kShape, "metric " + info.name + " has the wrong number of scores");
    }
    std::vector<double> syn;
    for (auto i : rows) syn.push_back(it->second[i]);
    r.inconsistency[info.name] = consistency::RankInconsistency(ref, syn, info.direction);
  }
  return r;
}

std::vector<SubsetResult> CompareAll(
    const std::vector<EvalItem>& items, const ScoreTable& scores,
    const std::map<std::string, std::vector<std::string>>& unions) {
  std::vector<SubsetResult> out;
  out.push_back(Compare(items, scores, "all", {}));
  std::set<std::string> groups;
  for (const auto& item : items) {
    if (!item.group.empty()) groups.insert(item.group);
  }
  for (const auto& g : groups) out.push_back(Compare(items, scores, g, {g}));
  for (const auto& [name, members] : unions) out.push_back(Compare(items, scores, name, members));
  return out;
}

nlohmann::json ToJson(const std::vector<SubsetResult>& results) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : results) {
    for (const auto& [metric, value] : r.inconsistency) {
      rows.push_back({{"subset", r.subset}, {"n", r.n}, {"metric", metric},
                      {"inconsistency", value}});
    }
  }
  return rows;
}

}  // namespace kcross::eval
