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


// Binary container: 8-byte magic "KCROSS01", little-endian uint64 header
// length, a UTF-8 JSON header, then raw little-endian float64 data.
//
// Header:
//   {"format": "kcross-checkpoint", "version": 1, "dtype": "float64",
//    "byte_order": "little", "metadata": {...},
//    "tensors": [{"name": ..., "shape": [...], "offset": ..., "nbytes": ...}]}
//
// Offsets are relative to the first byte after the header. Complex weights
// appear as separate real-valued entries (A/B, re/im).

#ifndef KCROSS_CHECKPOINT_HPP_
#define KCROSS_CHECKPOINT_HPP_

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kcross/nn.hpp"
#include "kcross/tensor.hpp"

namespace kcross::ckpt {

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* Find(const std::string& name) const;
  void Add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }
  void AddState(const nn::StateDict& sd);
};

// Writes to a temporary file and renames it into place.
void Write(const std::string& path, const Checkpoint& ckpt);
Checkpoint Read(const std::string& path);

// Copies every entry of `sd` from the checkpoint. Missing names or shape
// mismatches raise kData.
void LoadState(const Checkpoint& ckpt, nn::StateDict& sd);

}  // namespace kcross::ckpt

#endif  // KCROSS_CHECKPOINT_HPP_
