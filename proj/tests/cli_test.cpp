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


#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gtest/gtest.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "kcross_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const json cfg = {
        {"seed", 3},
        {"run_dir", (dir_ / "run").string()},
        {"model", {{"base_channels", 4}, {"code_dim", 32}, {"hidden", 16}, {"patch_size", 32}}},
        {"train", {{"stage1_epochs", 1}, {"stage2_epochs", 3}, {"batch_size", 4}}},
        {"phantom", {{"n", 10}, {"size", 32}, {"seed", 3}}}};
    std::ofstream(dir_ / "config.json") << cfg.dump(2);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static Outcome Exec(const std::string& args, const std::string& env = "") {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd =
        env + " " + KCROSS_CLI + " " + args + " 2>" + err.string();
    Outcome r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = Slurp(err);
    return r;
  }

  static std::string Cfg() { return "--config " + (dir_ / "config.json").string(); }

  static fs::path dir_;
};

fs::path CliTest::dir_;

TEST_F(CliTest, GenDataIsByteDeterministic) {
  const Outcome a = Exec("gen-data --n 50 --seed 7 --out " + (dir_ / "g1").string() +
                          " --run-dir " + (dir_ / "r1").string());
  const Outcome b = Exec("gen-data --n 50 --seed 7 --out " + (dir_ / "g2").string() +
                          " --run-dir " + (dir_ / "r2").string());
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string m1 = Slurp(dir_ / "g1" / "manifest.jsonl");
  EXPECT_FALSE(m1.empty());
  EXPECT_EQ(m1, Slurp(dir_ / "g2" / "manifest.jsonl"));
}

TEST_F(CliTest, FullPipeline) {
  ASSERT_EQ(Exec("gen-data " + Cfg()).code, 0);
  const fs::path run = dir_ / "run";
  ASSERT_TRUE(fs::exists(run / "data" / "manifest.jsonl"));

  const Outcome s1 = Exec("train-stage1 " + Cfg());
  ASSERT_EQ(s1.code, 0) << s1.err;
  EXPECT_TRUE(fs::exists(run / "stage1.kcx"));
  EXPECT_TRUE(fs::exists(run / "stage1_losses.jsonl"));
  const json snap = json::parse(Slurp(run / "config.train-stage1.json"));
  EXPECT_EQ(snap.at("seed"), 3);
  EXPECT_EQ(snap.at("model").at("base_channels"), 4);

  const Outcome s2 = Exec("train-stage2 --ratings oracle " + Cfg());
  ASSERT_EQ(s2.code, 0) << s2.err;
  EXPECT_TRUE(fs::exists(run / "model.kcx"));
  EXPECT_TRUE(fs::exists(run / "stage2_losses.jsonl"));

  std::string image;
  for (const auto& e : fs::directory_iterator(run / "data")) {
    if (e.path().string().ends_with("_that.png")) image = e.path().string();
  }
  ASSERT_FALSE(image.empty());
  const Outcome sc = Exec("score --healthy --image " + image + " " + Cfg());
  ASSERT_EQ(sc.code, 0) << sc.err;
  const json report = json::parse(sc.out);
  EXPECT_TRUE(report.at("health_path").get<bool>());
  EXPECT_DOUBLE_EQ(report.at("eta_total").get<double>(),
                   report.at("eta_nat").get<double>() + report.at("eta_complex").get<double>());

  const fs::path table = dir_ / "table.json";
  const Outcome ev = Exec("evaluate --metrics mae,psnr,ssim,kcross --out " + table.string() + " " + Cfg());
  ASSERT_EQ(ev.code, 0) << ev.err;
  const json rows = json::parse(Slurp(table));
  std::set<std::string> metrics;
  for (const auto& row : rows) {
    if (row.at("subset") != "all") continue;
    metrics.insert(row.at("metric").get<std::string>());
    EXPECT_GE(row.at("inconsistency").get<double>(), 0.0);
    EXPECT_LE(row.at("inconsistency").get<double>(), 0.9);
  }
  EXPECT_EQ(metrics, (std::set<std::string>{"mae", "psnr", "ssim", "kcross"}));

  const Outcome missing = Exec("train-stage2 --ratings store " + Cfg());
  EXPECT_EQ(missing.code, 4);
  EXPECT_EQ(json::parse(missing.err).at("error").at("kind"), "data");
}

TEST_F(CliTest, RunDirFromEnvironment) {
  const fs::path env_dir = dir_ / "env_run";
  const Outcome r = Exec("gen-data --n 5 --seed 1", "KCROSS_RUN_DIR=" + env_dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(env_dir / "data" / "manifest.jsonl"));
  EXPECT_TRUE(fs::exists(env_dir / "config.gen-data.json"));
}

TEST_F(CliTest, ErrorsAreJsonWithExitCodes) {
  std::ofstream(dir_ / "bad.json") << R"({"train": {"epochs": 3}})";
  const Outcome bad = Exec("gen-data --config " + (dir_ / "bad.json").string());
  EXPECT_EQ(bad.code, 2);
  const json err = json::parse(bad.err);
  EXPECT_EQ(err.at("error").at("kind"), "config");
  EXPECT_NE(err.at("error").at("message").get<std::string>().find("train.epochs"),
            std::string::npos);

  ASSERT_EQ(Exec("gen-data --n 2 --out " + (dir_ / "g").string() + " --run-dir " +
                 (dir_ / "r").string())
                .code,
            0);
  const fs::path png = dir_ / "g" / "p00000_that.png";
  const Outcome no_model = Exec("score --image " + png.string() + " --model " +
                            (dir_ / "absent.kcx").string());
  EXPECT_EQ(no_model.code, 3);
  EXPECT_EQ(json::parse(no_model.err).at("error").at("kind"), "not_found");
}

}  // namespace
