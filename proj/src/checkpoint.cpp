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


#include "kcross/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "kcross/errors.hpp"

namespace kcross::ckpt {
namespace {

constexpr char kMagic[8] = {'K', 'C', 'R', 'O', 'S', 'S', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

}  // namespace

const Tensor* Checkpoint::Find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void Checkpoint::AddState(const nn::StateDict& sd) {
  for (const auto& e : sd.entries()) Add(e.name, *e.tensor);
}

void Write(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json header = {{"format", "kcross-checkpoint"},
                           {"version", 1},
                           {"dtype", "float64"},
                           {"byte_order", "little"},
                           {"metadata", ckpt.metadata},
                           {"tensors", nlohmann::json::array()}};
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    const std::uint64_t nbytes = t.numel() * sizeof(double);
    header["tensors"].push_back(
        {{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
  }
  const std::string text = header.dump();
  const std::uint64_t length = text.size();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write checkpoint " + tmp);
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&length), sizeof(length));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& entry : ckpt.tensors) {
      const Tensor& t = entry.second;
      out.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!out) Fail(ErrorKind::kIo, "short write on checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Read(const std::string& path) {
  if (!std::filesystem::exists(path)) Fail(ErrorKind::kNotFound, "no checkpoint at " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open checkpoint " + path);
  char magic[8];
  std::uint64_t length = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    Fail(ErrorKind::kData, path + " is not a K-CROSS checkpoint");
  }
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) Fail(ErrorKind::kData, path + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kData, path + ": malformed header: " + e.what());
  }
  if (header.value("dtype", "") != "float64" || header.value("byte_order", "") != "little") {
    Fail(ErrorKind::kData, path + ": unsupported dtype or byte order");
  }
  Checkpoint ckpt;
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  const std::streamoff base = in.tellg();
  for (const auto& entry : header.at("tensors")) {
    const Shape shape = entry.at("shape").get<Shape>();
    Tensor t(shape);
    const std::uint64_t nbytes = entry.at("nbytes").get<std::uint64_t>();
    if (nbytes != t.numel() * sizeof(double)) {
      Fail(ErrorKind::kData, path + ": size mismatch for " + entry.at("name").get<std::string>());
    }
    in.seekg(base + static_cast<std::streamoff>(entry.at("offset").get<std::uint64_t>()));
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(nbytes));
    if (!in) Fail(ErrorKind::kData, path + ": truncated tensor data");
    ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  return ckpt;
}

void LoadState(const Checkpoint& ckpt, nn::StateDict& sd) {
  for (const auto& e : sd.entries()) {
    const Tensor* t = ckpt.Find(e.name);
    if (t == nullptr) Fail(ErrorKind::kData, "checkpoint lacks tensor " + e.name);
    if (t->shape() != e.tensor->shape()) {
      Fail(ErrorKind::kData, "checkpoint tensor " + e.name + " has shape " +
                                 ShapeString(t->shape()) + ", model expects " +
                                 ShapeString(e.tensor->shape()));
    }
    *e.tensor = *t;
  }
}

}  // namespace kcross::ckpt
