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


// Metric-versus-reference comparison: every registered metric scores each
// synthesized image, then ranking inconsistency against the reference levels
// is reported over the whole set and over named subsets.

#ifndef KCROSS_EVALUATION_HPP_
#define KCROSS_EVALUATION_HPP_

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "kcross/consistency.hpp"
#include "kcross/model.hpp"
#include "kcross/segmentation.hpp"

namespace kcross::eval {

struct EvalItem {
  std::string id;
  Image target;
  Image synthesized;
  bool healthy = false;
  double reference = 0.0;  // rating on the 10-level grid
  std::string group;       // degradation kind, or empty
};

// Per-metric raw scores, aligned with the item order.
using ScoreTable = std::map<std::string, std::vector<double>>;

// `model` may be null, in which case kcross is omitted.
ScoreTable ScoreAll(const std::vector<EvalItem>& items, model::KCrossModel* model,
                    const seg::Segmenter* segmenter);

struct SubsetResult {
  std::string subset;
  int n = 0;
  std::map<std::string, double> inconsistency;  // metric -> value
};

// Inconsistency of each metric on the items whose group is in `groups`
// (all items when `groups` is empty).
SubsetResult Compare(const std::vector<EvalItem>& items, const ScoreTable& scores,
                     const std::string& name, const std::vector<std::string>& groups);

// Whole set, each group on its own, and any extra named unions.
std::vector<SubsetResult> CompareAll(
    const std::vector<EvalItem>& items, const ScoreTable& scores,
    const std::map<std::string, std::vector<std::string>>& unions = {});

nlohmann::json ToJson(const std::vector<SubsetResult>& results);

}  // namespace kcross::eval

#endif  // KCROSS_EVALUATION_HPP_
