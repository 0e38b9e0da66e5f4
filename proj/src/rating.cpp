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


#include "kcross/rating.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "kcross/errors.hpp"

namespace kcross::rating {

using nlohmann::json;

namespace {

std::int64_t NowMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

json RatingRecord::ToJson() const {
  return {{"image_id", image_id},
          {"rater_id", rater_id},
          {"level", level},
          {"timestamp_ms", timestamp_ms}};
}

RatingRecord RatingRecord::FromJson(const json& j) {
  RatingRecord r;
  try {
    r.image_id = j.at("image_id").get<std::string>();
    r.rater_id = j.at("rater_id").get<std::string>();
    r.level = j.at("level").get<double>();
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
  } catch (const json::exception& e) {
    Fail(ErrorKind::kData, std::string("malformed rating record: ") + e.what());
  }
  return r;
}

int GridIndex(double level) {
  const double k = std::round(level * 10.0);
  if (!std::isfinite(level) || k < 0.0 || k > 9.0 || std::abs(level * 10.0 - k) > 1e-9) {
    Fail(ErrorKind::kValidation,
         "level " + json(level).dump() + " is not on the grid 0.0, 0.1, ..., 0.9");
  }
  return static_cast<int>(k);
}

double AggregateLevels(std::vector<double> levels) {
  if (levels.size() < 3) {
    Fail(ErrorKind::kInsufficientData,
         "aggregation needs at least 3 ratings, have " + std::to_string(levels.size()));
  }
  std::vector<int> k;
  for (double l : levels) k.push_back(GridIndex(l));
  std::sort(k.begin(), k.end());
  long sum = 0;
  for (std::size_t i = 1; i + 1 < k.size(); ++i) sum += k[i];
  const long n = static_cast<long>(k.size()) - 2;
  // Nearest of sum / n with ties up, in integer arithmetic.
  const long rounded = (2 * sum + n) / (2 * n);
  return static_cast<double>(rounded) / 10.0;
}

RatingStore::RatingStore(std::string path, std::set<std::string> image_ids, Clock clock)
    : path_(std::move(path)), image_ids_(std::move(image_ids)), clock_(std::move(clock)) {
  if (!clock_) clock_ = NowMs;
  Load();
}

void RatingStore::Load() {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      Fail(ErrorKind::kData, path_ + ":" + std::to_string(lineno) + ": not valid JSON");
    }
    RatingRecord r = RatingRecord::FromJson(j);
    GridIndex(r.level);
    ++log_lines_;
    auto it = std::find_if(records_.begin(), records_.end(), [&](const RatingRecord& x) {
      return x.image_id == r.image_id && x.rater_id == r.rater_id;
    });
    if (it != records_.end()) {
      *it = r;
    } else {
      records_.push_back(r);
    }
  }
}

void RatingStore::RequireImage(const std::string& image_id) const {
  if (!image_ids_.count(image_id)) Fail(ErrorKind::kNotFound, "unknown image " + image_id);
}

RatingRecord RatingStore::Submit(const std::string& image_id, const std::string& rater_id,
                                 double level) {
  RequireImage(image_id);
  if (rater_id.empty()) Fail(ErrorKind::kValidation, "rater id must not be empty");
  const int k = GridIndex(level);
  RatingRecord r{image_id, rater_id, k / 10.0, clock_()};
  std::lock_guard<std::mutex> lock(mu_);
  {
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) Fail(ErrorKind::kIo, "cannot append to " + path_);
    out << r.ToJson().dump() << "\n";
    out.flush();
    if (!out) Fail(ErrorKind::kIo, "write failed for " + path_);
  }
  ++log_lines_;
  auto it = std::find_if(records_.begin(), records_.end(), [&](const RatingRecord& x) {
    return x.image_id == image_id && x.rater_id == rater_id;
  });
  if (it != records_.end()) {
    *it = r;
  } else {
    records_.push_back(r);
  }
  if (log_lines_ > 2 * records_.size() + kCompactSlack) CompactLocked();
  return r;
}

std::vector<RatingRecord> RatingStore::ForImage(const std::string& image_id) const {
  RequireImage(image_id);
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<RatingRecord> out;
  for (const auto& r : records_) {
    if (r.image_id == image_id) out.push_back(r);
  }
  return out;
}

std::vector<RatingRecord> RatingStore::All() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

bool RatingStore::HasRated(const std::string& image_id, const std::string& rater_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  return std::any_of(records_.begin(), records_.end(), [&](const RatingRecord& x) {
    return x.image_id == image_id && x.rater_id == rater_id;
  });
}

std::size_t RatingStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_.size();
}

std::size_t RatingStore::log_lines() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_lines_;
}

double RatingStore::Aggregate(const std::string& image_id) const {
  std::vector<double> levels;
  for (const auto& r : ForImage(image_id)) levels.push_back(r.level);
  if (levels.size() < 3) {
    Fail(ErrorKind::kInsufficientData, "image " + image_id + " has " +
                                           std::to_string(levels.size()) +
                                           " rating(s); aggregation needs at least 3");
  }
  return AggregateLevels(levels);
}

void RatingStore::Compact() {
  std::lock_guard<std::mutex> lock(mu_);
  CompactLocked();
}

void RatingStore::CompactLocked() {
  const std::string tmp = path_ + ".compact";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + tmp);
    for (const auto& r : records_) out << r.ToJson().dump() << "\n";
    out.flush();
    if (!out) Fail(ErrorKind::kIo, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path_);
  log_lines_ = records_.size();
}

}  // namespace kcross::rating
