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


#include "kcross/rating_server.hpp"

#include <algorithm>
#include <cmath>

#include "httplib.h"
#include "json.hpp"
#include "kcross/kspace.hpp"

namespace kcross::rating {
namespace {

using nlohmann::json;

void SendJson(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void SendError(httplib::Response& res, ErrorKind kind, const std::string& message) {
  SendJson(res, HttpStatus(kind),
           {{"error", {{"kind", std::string(ErrorKindName(kind))}, {"message", message}}}});
}

template <typename F>
httplib::Server::Handler Guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      SendError(res, e.kind(), e.what());
    } catch (const json::exception& e) {
      SendError(res, ErrorKind::kInvalidInput, std::string("bad JSON: ") + e.what());
    } catch (const std::exception& e) {
      SendError(res, ErrorKind::kIo, e.what());
    }
  };
}

const char* kPanels[] = {"reference", "synthesized", "error_map", "kspace_reference",
                         "kspace_synthesized"};

}  // namespace

int HttpStatus(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kValidation: return 422;
    case ErrorKind::kInsufficientData: return 409;
    case ErrorKind::kInvalidInput:
    case ErrorKind::kInvalidArgument: return 400;
    default: return 500;
  }
}

Gray8 ErrorMapPanel(const Image& reference, const Image& synthesized) {
  if (!reference.SameShape(synthesized)) {
    Fail(ErrorKind::kShape, "error map needs images of equal size");
  }
  Image diff(reference.rows, reference.cols);
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff.pixels[i] = std::abs(reference.pixels[i] - synthesized.pixels[i]);
  }
  return ToGray8(diff, 0.0, 0.25);
}

Gray8 KspacePanel(const Image& image) {
  return ToGray8(AmplitudePanel(ForwardKSpace(image)), 0.0, 1.0);
}

RatingServer::RatingServer(data::Manifest manifest, RatingStore& store)
    : manifest_(std::move(manifest)), store_(store),
      server_(std::make_unique<httplib::Server>()) {
  Routes();
}

RatingServer::~RatingServer() { Stop(); }

std::vector<std::uint8_t> RatingServer::Panel(const std::string& id,
                                              const std::string& panel) const {
  const data::ManifestRecord* rec = manifest_.Find(id);
  if (rec == nullptr) Fail(ErrorKind::kNotFound, "unknown image " + id);
  if (std::find(std::begin(kPanels), std::end(kPanels), panel) == std::end(kPanels)) {
    Fail(ErrorKind::kNotFound, "unknown panel " + panel);
  }
  const Image t = LoadPng(manifest_.PathOf(rec->target));
  if (panel == "reference") return EncodePng8(ToGray8(t));
  if (panel == "kspace_reference") return EncodePng8(KspacePanel(t));
  const Image t_hat = LoadPng(manifest_.PathOf(rec->synthesized));
  if (panel == "synthesized") return EncodePng8(ToGray8(t_hat));
  if (panel == "kspace_synthesized") return EncodePng8(KspacePanel(t_hat));
  return EncodePng8(ErrorMapPanel(t, t_hat));
}

void RatingServer::Routes() {
  server_->Get("/api/pairs/next", Guarded([this](const httplib::Request& req,
                                                 httplib::Response& res) {
    const std::string rater = req.get_param_value("rater");
    if (rater.empty()) Fail(ErrorKind::kValidation, "query parameter 'rater' is required");
    int remaining = 0;
    const data::ManifestRecord* next = nullptr;
    for (const auto& r : manifest_.records) {
      if (store_.HasRated(r.id, rater)) continue;
      ++remaining;
      if (next == nullptr) next = &r;
    }
    if (next == nullptr) {
      SendJson(res, 200, {{"done", true}, {"remaining", 0}});
      return;
    }
    const std::string base = "/api/images/" + next->id + "/";
    json panels = json::object();
    for (const char* p : kPanels) panels[p] = base + p + ".png";
    SendJson(res, 200,
             {{"done", false},
              {"image_id", next->id},
              {"healthy", next->healthy},
              {"remaining", remaining},
              {"panels", panels}});
  }));

  server_->Get(R"(/api/images/([^/]+)/([a-z_]+)\.png)",
               Guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto png = Panel(req.matches[1], req.matches[2]);
                 res.status = 200;
                 res.set_content(std::string(png.begin(), png.end()), "image/png");
               }));

  server_->Get(R"(/api/images/([^/]+)/aggregate)",
               Guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 const double level = store_.Aggregate(id);
                 SendJson(res, 200,
                          {{"image_id", id},
                           {"level", level},
                           {"count", store_.ForImage(id).size()}});
               }));

  server_->Post("/api/ratings", Guarded([this](const httplib::Request& req,
                                               httplib::Response& res) {
    const json body = json::parse(req.body);
    if (!body.is_object() || !body.contains("image_id") || !body.contains("rater_id") ||
        !body.contains("level") || !body.at("level").is_number()) {
      Fail(ErrorKind::kInvalidInput, "body must be {image_id, rater_id, level}");
    }
    const RatingRecord r = store_.Submit(body.at("image_id").get<std::string>(),
                                         body.at("rater_id").get<std::string>(),
                                         body.at("level").get<double>());
    SendJson(res, 201, r.ToJson());
  }));

  server_->Get("/api/export", Guarded([this](const httplib::Request&, httplib::Response& res) {
    json items = json::array(), pending = json::array();
    for (const auto& rec : manifest_.records) {
      const auto count = store_.ForImage(rec.id).size();
      if (count < 3) {
        pending.push_back({{"id", rec.id}, {"count", count}});
        continue;
      }
      json item = rec.ToJson();
      item["rating"] = store_.Aggregate(rec.id);
      item["count"] = count;
      items.push_back(item);
    }
    SendJson(res, 200, {{"items", items}, {"pending", pending}});
  }));
}

int RatingServer::Start(const std::string& host, int port) {
  if (thread_.joinable()) Fail(ErrorKind::kState, "server already running");
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) Fail(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void RatingServer::Serve(const std::string& host, int port) {
  if (!server_->listen(host, port)) {
    Fail(ErrorKind::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void RatingServer::Stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace kcross::rating
