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


// kcross: data generation, training, scoring, evaluation and the rating
// server behind one entry point.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "kcross/config.hpp"
#include "kcross/dataset.hpp"
#include "kcross/errors.hpp"
#include "kcross/evaluation.hpp"
#include "kcross/image_io.hpp"
#include "kcross/losses.hpp"
#include "kcross/rating.hpp"
#include "kcross/rating_server.hpp"
#include "kcross/segmentation.hpp"
#include "kcross/training.hpp"

namespace {

using namespace kcross;
using nlohmann::json;

struct Options {
  std::string config_path;
  std::string run_dir;
  // gen-data
  int n = -1;
  std::int64_t seed = -1;
  bool healthy = false;
  std::string out;
  // training
  bool resume = false;
  std::string stage1_ckpt;
  std::string ratings_source = "store";
  // score / evaluate
  std::string model_path;
  std::string image;
  std::string manifest;
  std::string segmenter;
  std::string metrics = "mae,psnr,ssim,kcross";
  std::string out_table;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
};

config::RunConfig ResolveConfig(const Options& o) {
  config::RunConfig c = o.config_path.empty() ? config::FromJson(json::object())
                                              : config::LoadFile(o.config_path);
  if (const char* env = std::getenv("KCROSS_RUN_DIR"); env != nullptr && *env != '\0') {
    c.run_dir = env;
  }
  if (!o.run_dir.empty()) c.run_dir = o.run_dir;
  if (!o.segmenter.empty()) c.train.segmenter = o.segmenter;
  c.Validate();
  return c;
}

void Snapshot(const config::RunConfig& c, const std::string& command) {
  std::filesystem::create_directories(c.run_dir);
  config::WriteSnapshot(c, c.run_dir + "/config." + command + ".json");
}

void PrintJson(const json& j) { std::cout << j.dump(2) << std::endl; }

std::unique_ptr<model::KCrossModel> LoadTrainedModel(const std::string& path,
                                                     std::uint64_t seed) {
  auto m = std::make_unique<model::KCrossModel>(training::ModelConfigFromCheckpoint(path), seed);
  training::LoadModel(path, *m);
  return m;
}

int GenData(const Options& o) {
  config::RunConfig c = ResolveConfig(o);
  if (o.n >= 0) c.phantom.n = o.n;
  if (o.seed >= 0) c.phantom.seed = static_cast<std::uint64_t>(o.seed);
  if (o.healthy) {
    c.phantom.healthy = true;
    std::erase(c.phantom.kinds, phantom::Degradation::kTumorTextureCorrupt);
  }
  c.Validate();
  const std::string out = o.out.empty()
                              ? std::filesystem::path(c.Resolve(c.paths.manifest)).parent_path().string()
                              : o.out;
  Snapshot(c, "gen-data");
  const data::Manifest m = data::GenerateSuite(out, c.phantom.n, c.phantom.seed, c.phantom.kinds,
                                               c.phantom.healthy, c.phantom.size);
  PrintJson({{"manifest", out + "/manifest.jsonl"}, {"records", m.records.size()}});
  return 0;
}

std::string ManifestPath(const Options& o, const config::RunConfig& c) {
  return o.manifest.empty() ? c.Resolve(c.paths.manifest) : o.manifest;
}

int TrainStage1(const Options& o) {
  const config::RunConfig c = ResolveConfig(o);
  Snapshot(c, "train-stage1");
  const data::Manifest m = data::ReadManifest(ManifestPath(o, c));
  std::vector<training::PairSample> pairs;
  for (const auto& r : m.records) {
    const data::LoadedPair p = data::LoadImages(m, r);
    pairs.push_back({r.id, p.source, p.target, r.healthy});
  }
  model::KCrossModel model(c.model, c.seed);
  const auto registry = seg::SegmenterRegistry::WithDefaults();
  const auto segmenter = registry.Get(c.train.segmenter);
  const losses::LpipsBackbone backbone;
  training::Stage1Trainer trainer(model, c.train, *segmenter, backbone);
  const std::string last = c.run_dir + "/stage1_last.kcx";
  if (o.resume && std::filesystem::exists(last)) trainer.LoadCheckpoint(last);
  const training::Stage1Result result = trainer.Run(pairs, c.run_dir);
  const std::string out = c.Resolve(c.paths.stage1_checkpoint);
  training::SaveModel(out, model, {{"seed", c.seed}, {"stage", 1}});
  json history = json::array();
  for (const auto& e : result.history) {
    history.push_back({{"epoch", e.epoch}, {"total", e.total},
                       {"validation_total", e.validation_total}});
  }
  PrintJson({{"checkpoint", out},
             {"epochs_run", result.epochs_run},
             {"early_stopped", result.early_stopped},
             {"history", history}});
  return 0;
}

int TrainStage2(const Options& o) {
  const config::RunConfig c = ResolveConfig(o);
  Snapshot(c, "train-stage2");
  const std::string ckpt = o.stage1_ckpt.empty() ? c.Resolve(c.paths.stage1_checkpoint)
                                                 : o.stage1_ckpt;
  auto model = LoadTrainedModel(ckpt, c.seed);
  if (!model->stage1_trained) Fail(ErrorKind::kState, ckpt + " holds no stage-1 weights");
  const data::Manifest m = data::ReadManifest(ManifestPath(o, c));

  std::vector<std::string> ids;
  std::vector<std::optional<double>> ratings;
  if (o.ratings_source == "oracle") {
    for (const auto& r : m.records) {
      ids.push_back(r.id);
      ratings.push_back(r.oracle);
    }
  } else if (o.ratings_source == "store") {
    std::set<std::string> known;
    for (const auto& r : m.records) known.insert(r.id);
    const rating::RatingStore store(c.Resolve(c.paths.ratings), known);
    for (const auto& r : m.records) {
      ids.push_back(r.id);
      if (store.ForImage(r.id).size() >= 3) {
        ratings.push_back(store.Aggregate(r.id));
      } else {
        ratings.emplace_back();
      }
    }
  } else {
    Fail(ErrorKind::kConfig, "--ratings must be 'store' or 'oracle'");
  }
  training::RequireRatings(ids, ratings);

  std::vector<Image> images;
  std::vector<bool> healthy;
  std::vector<double> levels;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    images.push_back(LoadPng(m.PathOf(m.records[i].synthesized)));
    healthy.push_back(m.records[i].healthy);
    levels.push_back(*ratings[i]);
  }
  const auto registry = seg::SegmenterRegistry::WithDefaults();
  const auto segmenter = registry.Get(c.train.segmenter);
  const model::Codes codes = model->Encode(images, healthy, segmenter.get());
  losses::LossLog log(c.run_dir + "/stage2_losses.jsonl");
  const training::Stage2Result result =
      training::TrainStage2(*model, codes, levels, c.train, &log);
  const std::string out = c.Resolve(c.paths.model_checkpoint);
  training::SaveModel(out, *model, {{"seed", c.seed}, {"stage", 2}});
  PrintJson({{"checkpoint", out},
             {"initial_inconsistency", result.initial_inconsistency},
             {"final_inconsistency", result.final_inconsistency},
             {"steps", result.history.size()}});
  return 0;
}

int Score(const Options& o) {
  const config::RunConfig c = ResolveConfig(o);
  const std::string path = o.model_path.empty() ? c.Resolve(c.paths.model_checkpoint)
                                                : o.model_path;
  auto model = LoadTrainedModel(path, c.seed);
  const Image image = LoadPng(o.image);
  std::shared_ptr<seg::Segmenter> segmenter;
  if (!o.healthy) segmenter = seg::SegmenterRegistry::WithDefaults().Get(c.train.segmenter);
  PrintJson(model->Score(image, segmenter.get(), o.healthy).ToJson());
  return 0;
}

int Evaluate(const Options& o) {
  const config::RunConfig c = ResolveConfig(o);
  Snapshot(c, "evaluate");
  const data::Manifest m = data::ReadManifest(ManifestPath(o, c));
  const std::string path = o.model_path.empty() ? c.Resolve(c.paths.model_checkpoint)
                                                : o.model_path;
  std::vector<std::string> wanted;
  for (std::size_t b = 0; b <= o.metrics.size();) {
    const std::size_t e = std::min(o.metrics.find(',', b), o.metrics.size());
    if (e > b) wanted.push_back(consistency::LookupMetric(o.metrics.substr(b, e - b)).name);
    b = e + 1;
  }
  const bool use_kcross = std::find(wanted.begin(), wanted.end(), "kcross") != wanted.end();
  std::unique_ptr<model::KCrossModel> model;
  if (use_kcross) model = LoadTrainedModel(path, c.seed);
  std::vector<eval::EvalItem> items;
  for (const auto& r : m.records) {
    if (!r.oracle) Fail(ErrorKind::kData, "record " + r.id + " has no reference level");
    const data::LoadedPair p = data::LoadImages(m, r);
    items.push_back({r.id, p.target, p.synthesized, r.healthy, *r.oracle,
                     r.degradation ? phantom::DegradationName(r.degradation->kind) : ""});
  }
  const auto segmenter = seg::SegmenterRegistry::WithDefaults().Get(c.train.segmenter);
  eval::ScoreTable scores = eval::ScoreAll(items, model.get(), segmenter.get());
  std::erase_if(scores, [&](const auto& kv) {
    return std::find(wanted.begin(), wanted.end(), kv.first) == wanted.end();
  });
  const auto results = eval::CompareAll(
      items, scores, {{"tumor_texture_corrupt+kspace_maskout",
                       {"tumor_texture_corrupt", "kspace_maskout"}}});
  const json table = eval::ToJson(results);
  const std::string out = o.out_table.empty() ? c.run_dir + "/evaluation.json" : o.out_table;
  std::ofstream(out) << table.dump(2) << "\n";
  PrintJson(table);
  return 0;
}

int Serve(const Options& o) {
  const config::RunConfig c = ResolveConfig(o);
  Snapshot(c, "serve");
  data::Manifest m = data::ReadManifest(ManifestPath(o, c));
  std::set<std::string> ids;
  for (const auto& r : m.records) ids.insert(r.id);
  rating::RatingStore store(c.Resolve(c.paths.ratings), ids);
  rating::RatingServer server(std::move(m), store);
  std::cerr << json({{"serving", o.host + ":" + std::to_string(o.port)}}).dump() << std::endl;
  server.Serve(o.host, o.port);
  return 0;
}

int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kValidation:
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kInvalidInput: return 2;
    case ErrorKind::kNotFound:
    case ErrorKind::kIo: return 3;
    case ErrorKind::kData:
    case ErrorKind::kInsufficientData: return 4;
    default: return 1;
  }
}

void ReportError(std::string_view kind, const std::string& message) {
  std::cerr << json({{"error", {{"kind", kind}, {"message", message}}}}).dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"K-CROSS quality metric for cross-modality MR synthesis"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--run-dir", o.run_dir, "output directory (overrides KCROSS_RUN_DIR)");
    sub->add_option("--segmenter", o.segmenter, "segmentation backend id");
  };
  auto* gen = app.add_subcommand("gen-data", "write a phantom suite and its manifest");
  common(gen);
  gen->add_option("--n", o.n, "number of phantoms");
  gen->add_option("--seed", o.seed, "suite seed");
  gen->add_option("--out", o.out, "output directory");
  gen->add_flag("--healthy", o.healthy, "lesion-free phantoms");

  auto* s1 = app.add_subcommand("train-stage1", "train the three feature branches");
  common(s1);
  s1->add_option("--manifest", o.manifest, "paired-slice manifest");
  s1->add_flag("--resume", o.resume, "continue from the run directory's last checkpoint");

  auto* s2 = app.add_subcommand("train-stage2", "fit the score networks to ratings");
  common(s2);
  s2->add_option("--manifest", o.manifest, "manifest of synthesized images");
  s2->add_option("--stage1-ckpt", o.stage1_ckpt, "stage-1 checkpoint");
  s2->add_option("--ratings", o.ratings_source, "'store' (aggregated ratings) or 'oracle'")
      ->check(CLI::IsMember({"store", "oracle"}));

  auto* sc = app.add_subcommand("score", "score one synthesized image");
  common(sc);
  sc->add_option("--model", o.model_path, "trained model checkpoint");
  sc->add_option("--image", o.image, "synthesized image (PNG)")->required()->check(CLI::ExistingFile);
  sc->add_flag("--healthy", o.healthy, "score through the healthy path");

  auto* ev = app.add_subcommand("evaluate", "compare metrics against reference levels");
  common(ev);
  ev->add_option("--manifest", o.manifest, "manifest with reference levels");
  ev->add_option("--model", o.model_path, "trained model checkpoint");
  ev->add_option("--metrics", o.metrics, "comma-separated metric names");
  ev->add_option("--out", o.out_table, "output table (JSON)");

  auto* sv = app.add_subcommand("serve", "run the rating HTTP service");
  common(sv);
  sv->add_option("--manifest", o.manifest, "manifest of pairs to rate");
  sv->add_option("--host", o.host, "bind address");
  sv->add_option("--port", o.port, "bind port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    ReportError("usage", e.what());
    return 2;
  }
  try {
    if (*gen) return GenData(o);
    if (*s1) return TrainStage1(o);
    if (*s2) return TrainStage2(o);
    if (*sc) return Score(o);
    if (*ev) return Evaluate(o);
    if (*sv) return Serve(o);
  } catch (const Error& e) {
    ReportError(ErrorKindName(e.kind()), e.what());
    return ExitCode(e.kind());
  } catch (const std::exception& e) {
    ReportError("internal", e.what());
    return 1;
  }
  return 1;
}
