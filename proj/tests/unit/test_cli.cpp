// Copyright 2026  The dsvae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "capture.hpp"
#include "dsvae/data_io.hpp"
#include "json.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
using test::run_cli;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({"gen-toy"}).code == 1);
  CHECK(run_cli({"gen-toy", "--out", "x", "--bogus"}).code == 1);
  CHECK(run_cli({"eval", "--out", "x"}).code == 1);
  CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("pipeline on a tiny corpus") {
  test::TempDir dir;
  const fs::path d = dir.path();
  write(d / "toy.json",
        R"({"train_per_class": 4, "dev_per_class": 2, "eval_per_class": 4, "clip_seconds": 0.5})");
  auto gen = run_cli({"gen-toy", "--config", (d / "toy.json").string(), "--out",
                      (d / "data").string()});
  REQUIRE(gen.code == 0);
  const fs::path manifest = d / "data" / "manifest.csv";
  CHECK(gen.out == manifest.string() + "\n");
  CHECK(dsvae::io::parse_manifest(manifest).size() == 20);

  write(d / "s1.json", R"({"max_iterations": 2, "batch_size": 4})");
  auto s1 = run_cli({"train-stage1", "--config", (d / "s1.json").string(), "--manifest",
                     manifest.string(), "--out", (d / "s1").string()});
  REQUIRE(s1.code == 0);
  CHECK(fs::exists(d / "s1" / "stage1.dsva"));
  CHECK(fs::exists(d / "s1" / "config.json"));
  std::istringstream log(slurp(d / "s1" / "train_stage1.ndjson"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    CHECK(nlohmann::json::parse(line).at("stage") == 1);
    ++lines;
  }
  CHECK(lines == 2);

  write(d / "s2.json", R"({"stage": 2, "epochs": 2, "batch_size": 4})");
  auto s2 = run_cli({"train-stage2", "--config", (d / "s2.json").string(), "--manifest",
                     manifest.string(), "--stage1-checkpoint",
                     (d / "s1" / "stage1.dsva").string(), "--out", (d / "s2").string()});
  REQUIRE(s2.code == 0);
  CHECK(fs::exists(d / "s2" / "epoch_001.dsva"));
  CHECK(fs::exists(d / "s2" / "epoch_002.dsva"));
  CHECK(nlohmann::json::parse(slurp(d / "s2" / "history.json")).size() == 2);

  auto sel = run_cli({"select-best", "--checkpoint", (d / "s2" / "epoch_001.dsva").string(),
                      "--checkpoint", (d / "s2" / "epoch_002.dsva").string(), "--manifest",
                      manifest.string(), "--out", (d / "sel").string()});
  REQUIRE(sel.code == 0);
  const auto selection = nlohmann::json::parse(slurp(d / "sel" / "selection.json"));
  CHECK(selection.at("candidates").size() == 2);
  CHECK(slurp(d / "sel" / "best.dsva") ==
        slurp(d / "s2" / selection.at("selected").get<std::string>()));
  const std::string best = (d / "sel" / "best.dsva").string();

  auto ev = run_cli({"eval", "--checkpoint", best, "--manifest", manifest.string(), "--split",
                     "eval", "--out", (d / "ev").string()});
  REQUIRE(ev.code == 0);
  const auto report = nlohmann::json::parse(slurp(d / "ev" / "report.json"));
  CHECK(report.at("counts").at("bonafide") == 4);
  CHECK(report.at("counts").at("synthetic") == 4);
  CHECK(ev.out == slurp(d / "ev" / "report.json"));

  // Single-class input is reported, not crashed on.
  write(d / "one.csv", "path,label,synthesizer_id,split\n" +
                           (d / "data" / "eval" / "eval_0000_bonafide.wav").string() +
                           ",bonafide,bonafide,eval\n");
  CHECK(run_cli({"eval", "--checkpoint", best, "--manifest", (d / "one.csv").string(),
                 "--out", (d / "ev1").string()})
            .code == 1);
  // A stage-1 checkpoint cannot score.
  CHECK(run_cli({"eval", "--checkpoint", (d / "s1" / "stage1.dsva").string(), "--manifest",
                 manifest.string(), "--out", (d / "ev2").string()})
            .code == 1);

  const std::string wav = (d / "data" / "eval" / "eval_0000_bonafide.wav").string();
  REQUIRE(fs::exists(wav));
  auto inf = run_cli({"infer", "--checkpoint", best, "--wav", wav, "--maps",
                      (d / "maps").string()});
  REQUIRE(inf.code == 0);
  const double score = std::stod(inf.out);
  CHECK(score >= 0.0);
  CHECK(score <= 1.0);
  CHECK(slurp(d / "maps" / "eval_0000_bonafide.score.txt") == inf.out);
  for (const char* kind : {"X", "Xhat", "Amap", "Xmap"}) {
    const auto bytes = dsvae::io::read_file(d / "maps" / (std::string("eval_0000_bonafide.") +
                                                          kind + ".pgm"));
    const auto img = dsvae::io::parse_pgm(bytes);
    CHECK(img.width == 96);
    CHECK(img.height == 80);
  }

  for (const auto& [which, width] : {std::pair{"fg", 32}, {"fd", 32}, {"both", 64}}) {
    auto emb = run_cli({"export-embeddings", "--checkpoint", best, "--manifest",
                        manifest.string(), "--which", which, "--split", "dev", "--out",
                        (d / "emb").string()});
    REQUIRE(emb.code == 0);
    std::istringstream csv(slurp(d / "emb" / "embeddings.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(std::count(header.begin(), header.end(), ',') == 3 + width - 1);
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 4);
  }
  CHECK(run_cli({"export-embeddings", "--checkpoint", best, "--manifest", manifest.string(),
                 "--which", "fz", "--out", (d / "emb").string()})
            .code == 1);

  // Corrupt checkpoints are rejected with exit code 1.
  auto bytes = dsvae::io::read_file(best);
  bytes.resize(bytes.size() / 2);
  dsvae::io::write_file(d / "half.dsva", bytes);
  CHECK(run_cli({"infer", "--checkpoint", (d / "half.dsva").string(), "--wav", wav}).code == 1);
}
