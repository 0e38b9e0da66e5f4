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


#include "kcross/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "kcross/errors.hpp"
#include "kcross/image_io.hpp"

namespace kcross::data {

using nlohmann::json;

json ManifestRecord::ToJson() const {
  json j = {{"id", id},
            {"source", source},
            {"target", target},
            {"synthesized", synthesized},
            {"healthy", healthy}};
  if (oracle) j["oracle"] = *oracle;
  if (degradation) {
    j["degradation"] = {{"kind", phantom::DegradationName(degradation->kind)},
                        {"severity", degradation->severity},
                        {"seed", degradation->seed}};
  }
  return j;
}

ManifestRecord ManifestRecord::FromJson(const json& j) {
  ManifestRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.source = j.at("source").get<std::string>();
    r.target = j.at("target").get<std::string>();
    r.synthesized = j.at("synthesized").get<std::string>();
    r.healthy = j.value("healthy", false);
    if (j.contains("oracle") && !j.at("oracle").is_null()) r.oracle = j.at("oracle").get<double>();
    if (j.contains("degradation") && !j.at("degradation").is_null()) {
      const json& d = j.at("degradation");
      DegradationInfo info;
      info.kind = phantom::ParseDegradation(d.at("kind").get<std::string>());
      info.severity = d.at("severity").get<double>();
      info.seed = d.at("seed").get<std::uint64_t>();
      r.degradation = info;
    }
  } catch (const json::exception& e) {
    Fail(ErrorKind::kData, std::string("malformed manifest record: ") + e.what());
  }
  if (r.id.empty()) Fail(ErrorKind::kData, "manifest record with empty id");
  return r;
}

std::string Manifest::PathOf(const std::string& relative) const {
  const std::filesystem::path p(relative);
  if (p.is_absolute() || base_dir.empty()) return relative;
  return (std::filesystem::path(base_dir) / p).string();
}

const ManifestRecord* Manifest::Find(const std::string& id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

Manifest ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kNotFound, "cannot open manifest " + path);
  Manifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      Fail(ErrorKind::kData, path + ":" + std::to_string(lineno) + ": not valid JSON");
    }
    ManifestRecord r = ManifestRecord::FromJson(j);
    if (m.Find(r.id) != nullptr) {
      Fail(ErrorKind::kData, path + ": duplicate id " + r.id);
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void WriteManifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + tmp);
    for (const auto& r : records) out << r.ToJson().dump() << "\n";
    if (!out) Fail(ErrorKind::kIo, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Manifest GenerateSuite(const std::string& out_dir, int n, std::uint64_t seed,
                       const std::vector<phantom::Degradation>& kinds, bool healthy,
                       int size) {
  std::filesystem::create_directories(out_dir);
  const auto specs = phantom::MakeSuite(n, seed, kinds, healthy, size);
  Manifest m;
  m.base_dir = out_dir;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const phantom::PhantomSample s = phantom::Generate(specs[i]);
    char id[32];
    std::snprintf(id, sizeof(id), "p%05zu", i);
    ManifestRecord r;
    r.id = id;
    r.source = r.id + "_s.png";
    r.target = r.id + "_t.png";
    r.synthesized = r.id + "_that.png";
    r.healthy = specs[i].healthy();
    r.oracle = s.oracle;
    r.degradation = DegradationInfo{specs[i].degradation, specs[i].severity, specs[i].seed};
    SavePng16(m.PathOf(r.source), s.source);
    SavePng16(m.PathOf(r.target), s.target);
    SavePng16(m.PathOf(r.synthesized), s.synthesized);
    m.records.push_back(std::move(r));
  }
  WriteManifest((std::filesystem::path(out_dir) / "manifest.jsonl").string(), m.records);
  return m;
}

LoadedPair LoadImages(const Manifest& manifest, const ManifestRecord& record) {
  LoadedPair p{LoadPng(manifest.PathOf(record.source)), LoadPng(manifest.PathOf(record.target)),
               LoadPng(manifest.PathOf(record.synthesized))};
  if (!p.source.SameShape(p.target) || !p.target.SameShape(p.synthesized)) {
    Fail(ErrorKind::kData, "images of " + record.id + " differ in size");
  }
  return p;
}

}  // namespace kcross::data
