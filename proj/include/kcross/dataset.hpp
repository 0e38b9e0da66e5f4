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


// Manifest of paired slices, one JSON object per line:
//   {"id": "p0000", "source": "p0000_s.png", "target": "p0000_t.png",
//    "synthesized": "p0000_that.png", "healthy": false, "oracle": 0.6,
//    "degradation": {"kind": "gaussian_blur", "severity": 0.31, "seed": 17}}
// Image paths are relative to the manifest's directory unless absolute.
// "oracle" and "degradation" are optional for externally prepared data.

#ifndef KCROSS_DATASET_HPP_
#define KCROSS_DATASET_HPP_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kcross/phantom.hpp"
#include "kcross/tensor.hpp"

namespace kcross::data {

struct DegradationInfo {
  phantom::Degradation kind = phantom::Degradation::kGaussianBlur;
  double severity = 0.0;
  std::uint64_t seed = 0;
};

struct ManifestRecord {
  std::string id;
  std::string source;
  std::string target;
  std::string synthesized;
  bool healthy = false;
  std::optional<double> oracle;
  std::optional<DegradationInfo> degradation;

  nlohmann::json ToJson() const;
  static ManifestRecord FromJson(const nlohmann::json& j);
};

struct Manifest {
  std::string base_dir;
  std::vector<ManifestRecord> records;

  std::string PathOf(const std::string& relative) const;
  const ManifestRecord* Find(const std::string& id) const;
};

Manifest ReadManifest(const std::string& path);
void WriteManifest(const std::string& path, const std::vector<ManifestRecord>& records);

// Phantom suite written as 16-bit PNGs plus manifest.jsonl under `out_dir`.
Manifest GenerateSuite(const std::string& out_dir, int n, std::uint64_t seed,
                       const std::vector<phantom::Degradation>& kinds, bool healthy,
                       int size = 64);

struct LoadedPair {
  Image source;
  Image target;
  Image synthesized;
};
LoadedPair LoadImages(const Manifest& manifest, const ManifestRecord& record);

}  // namespace kcross::data

#endif  // KCROSS_DATASET_HPP_
