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


// HTTP front of the rating store.
//
//   GET  /api/pairs/next?rater=<id>        next pair this rater has not rated
//   GET  /api/images/<id>/<panel>.png      reference | synthesized | error_map |
//                                          kspace_reference | kspace_synthesized
//   POST /api/ratings                      {"image_id", "rater_id", "level"}
//   GET  /api/images/<id>/aggregate        trimmed-mean level
//   GET  /api/export                       stage-2 training manifest
//
// Failures answer {"error": {"kind": ..., "message": ...}}.

#ifndef KCROSS_RATING_SERVER_HPP_
#define KCROSS_RATING_SERVER_HPP_

#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "kcross/dataset.hpp"
#include "kcross/errors.hpp"
#include "kcross/image_io.hpp"
#include "kcross/rating.hpp"

namespace httplib {
class Server;
}

namespace kcross::rating {

int HttpStatus(ErrorKind kind);

// |t - t_hat| mapped onto 0..255 over [0, 0.25].
Gray8 ErrorMapPanel(const Image& reference, const Image& synthesized);
Gray8 KspacePanel(const Image& image);

class RatingServer {
 public:
  RatingServer(data::Manifest manifest, RatingStore& store);
  ~RatingServer();
  RatingServer(const RatingServer&) = delete;
  RatingServer& operator=(const RatingServer&) = delete;

  // Binds (port 0 picks a free one), serves on a background thread and
  // returns the bound port.
  int Start(const std::string& host, int port);
  // Blocks until Stop() is called from elsewhere.
  void Serve(const std::string& host, int port);
  void Stop();

 private:
  void Routes();
  std::vector<std::uint8_t> Panel(const std::string& id, const std::string& panel) const;

  data::Manifest manifest_;
  RatingStore& store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace kcross::rating

#endif  // KCROSS_RATING_SERVER_HPP_
