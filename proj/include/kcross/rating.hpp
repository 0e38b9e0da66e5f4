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


#ifndef KCROSS_RATING_HPP_
#define KCROSS_RATING_HPP_

#include <cstdint>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace kcross::rating {

struct RatingRecord {
  std::string image_id;
  std::string rater_id;
  double level = 0.0;  // k / 10, k in 0..9
  std::int64_t timestamp_ms = 0;

  nlohmann::json ToJson() const;
  static RatingRecord FromJson(const nlohmann::json& j);
};

// Grid index of `level`, or kValidation if it is not one of 0.0 .. 0.9.
int GridIndex(double level);

// Drops one highest and one lowest rating, averages the rest and rounds to
// the nearest level, ties upward. Needs at least three ratings.
double AggregateLevels(std::vector<double> levels);

// Ratings persisted as an append-only JSON-lines log; the last line for an
// (image, rater) pair wins. Thread-safe.
class RatingStore {
 public:
  using Clock = std::function<std::int64_t()>;

  RatingStore(std::string path, std::set<std::string> image_ids, Clock clock = {});

  // Validates, appends to the log and flushes before returning.
  RatingRecord Submit(const std::string& image_id, const std::string& rater_id, double level);

  std::vector<RatingRecord> ForImage(const std::string& image_id) const;
  std::vector<RatingRecord> All() const;
  bool HasRated(const std::string& image_id, const std::string& rater_id) const;
  std::size_t size() const;
  double Aggregate(const std::string& image_id) const;
  const std::set<std::string>& image_ids() const { return image_ids_; }

  // Rewrites the log with one line per active record. Also triggered by
  // Submit once superseded lines dominate the log.
  void Compact();
  std::size_t log_lines() const;

 private:
  static constexpr std::size_t kCompactSlack = 64;

  void Load();
  void CompactLocked();
  void RequireImage(const std::string& image_id) const;

  std::string path_;
  std::set<std::string> image_ids_;
  Clock clock_;
  mutable std::mutex mu_;
  std::vector<RatingRecord> records_;  // insertion order of first submission
  std::size_t log_lines_ = 0;
};

}  // namespace kcross::rating

#endif  // KCROSS_RATING_HPP_
