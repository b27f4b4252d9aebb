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

#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"

#include "dsvae/error.hpp"
#include "dsvae/evaluation.hpp"
#include "oracles.hpp"

using namespace dsvae;
using eval::ScoreRecord;

namespace {

std::vector<ScoreRecord> records(const std::vector<double>& bona,
                                 const std::vector<double>& syn,
                                 const std::vector<std::string>& ids = {}) {
  std::vector<ScoreRecord> r;
  for (std::size_t i = 0; i < bona.size(); ++i)
    r.push_back({"b" + std::to_string(i), bona[i], 0, "bonafide"});
  for (std::size_t i = 0; i < syn.size(); ++i)
    r.push_back({"s" + std::to_string(i), syn[i], 1, ids.empty() ? "G01" : ids[i]});
  return r;
}

}  // namespace

TEST_CASE("eer examples") {
  // Perfect separation.
  CHECK(eval::compute_eer(std::vector<double>{0.1, 0.2}, std::vector<double>{0.8, 0.9}).eer == 0.0);
  // Fully inverted.
  CHECK(eval::compute_eer(std::vector<double>{0.8, 0.9}, std::vector<double>{0.1, 0.2}).eer == 1.0);
  // Interleaved: both rates are 0.5 at threshold 0.6.
  const auto r = eval::compute_eer(std::vector<double>{0.4, 0.6}, std::vector<double>{0.5, 0.7});
  CHECK(r.eer == doctest::Approx(0.5));
  // Identical scores.
  CHECK(eval::compute_eer(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5}).eer ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(eval::compute_eer(std::vector<double>{}, std::vector<double>{0.5}), InputError);
  CHECK_THROWS_AS(eval::compute_eer(records({0.1}, {})), InputError);
}

TEST_CASE("eer agrees with brute force") {
  std::mt19937_64 g(8);
  std::uniform_int_distribution<int> size(1, 30);
  std::uniform_int_distribution<int> level(0, 9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> b(size(g)), s(size(g));
    // Coarse levels produce many ties.
    for (double& v : b) v = level(g);
    for (double& v : s) v = level(g) + 1;
    const double want = oracle::brute_force_eer(b, s).eer;
    const double got = eval::compute_eer(b, s).eer;
    INFO("trial " << trial);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    // Strictly increasing maps keep the EER.
    std::vector<double> b2, s2;
    for (double v : b) b2.push_back(std::exp(0.3 * v) - 7.0);
    for (double v : s) s2.push_back(std::exp(0.3 * v) - 7.0);
    CHECK(eval::compute_eer(b2, s2).eer == doctest::Approx(got).epsilon(1e-12));
  }
}

TEST_CASE("roc curve is monotone") {
  const std::vector<double> b{0.3, 0.1, 0.7, 0.3}, s{0.6, 0.9, 0.2};
  const auto roc = eval::roc_curve(b, s);
  CHECK(roc.front().threshold == -std::numeric_limits<double>::infinity());
  CHECK(roc.back().threshold == std::numeric_limits<double>::infinity());
  CHECK(roc.size() == 6 + 2);
  CHECK(roc.front().fpr == 1.0);
  CHECK(roc.front().fnr == 0.0);
  CHECK(roc.back().fpr == 0.0);
  CHECK(roc.back().fnr == 1.0);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    CHECK(roc[i].threshold > roc[i - 1].threshold);
    CHECK(roc[i].fpr <= roc[i - 1].fpr);
    CHECK(roc[i].fnr >= roc[i - 1].fnr);
  }
}

TEST_CASE("balanced accuracy") {
  // Bona fide: 1 of 2 right; synthetic: 3 of 3 right.
  const auto r = records({0.2, 0.6}, {0.5, 0.9, 0.99});
  CHECK(eval::balanced_accuracy(r) == doctest::Approx(0.75));
  CHECK(eval::balanced_accuracy(r, 0.95) == doctest::Approx(0.5 * (1.0 + 1.0 / 3.0)));
  // Duplicating one class does not move the metric.
  auto dup = r;
  for (const auto& x : r)
    if (x.label == 1) dup.push_back(x);
  CHECK(eval::balanced_accuracy(dup) == doctest::Approx(0.75));
  CHECK_THROWS_AS(eval::balanced_accuracy(records({0.1}, {})), InputError);
}

TEST_CASE("per synthesizer report partitions the synthetic items") {
  const auto r = records({0.1, 0.7}, {0.9, 0.2, 0.8, 0.6}, {"G02", "G01", "G02", "G03"});
  const auto rep = eval::per_synthesizer_report(r);
  REQUIRE(rep.size() == 4);
  CHECK(rep[0].synthesizer_id == "bonafide");
  CHECK(rep[0].accuracy == 0.5);
  CHECK(rep[1].synthesizer_id == "G02");
  CHECK(rep[1].count == 2);
  CHECK(rep[1].accuracy == 1.0);
  CHECK(rep[2].accuracy == 0.0);
  std::size_t total = 0;
  for (const auto& g : rep) total += g.count;
  CHECK(total == r.size());
}

TEST_CASE("report and score formats") {
  const auto r = records({0.1}, {0.25});
  const auto rep = eval::evaluate(r);
  CHECK(rep.n_bonafide == 1);
  CHECK(rep.n_synthetic == 1);
  const auto j = nlohmann::json::parse(eval::format_report_json(rep));
  CHECK(j.at("eer").get<double>() == 0.0);
  CHECK(j.at("counts").at("bonafide") == 1);
  CHECK(j.at("per_synthesizer").size() == 2);
  CHECK(j.at("failures").empty());
  CHECK(eval::format_scores_csv(r) ==
        "clip_id,label,synthesizer_id,score\n"
        "b0,bonafide,bonafide,0.1\n"
        "s0,synthetic,G01,0.25\n");
  CHECK(eval::format_scores_csv({}) == "clip_id,label,synthesizer_id,score\n");
}

TEST_CASE("embedding formats") {
  const std::vector<eval::EmbeddingRow> rows{{"a", 0, "bonafide", {1.5f, -2.0f}},
                                             {"b", 1, "G01", {0.1f, 3.0f}}};
  CHECK(eval::format_embeddings_csv(rows) ==
        "clip_id,label,synthesizer_id,f_0,f_1\n"
        "a,bonafide,bonafide,1.5,-2\n"
        "b,synthetic,G01,0.100000001,3\n");
  CHECK(eval::embedding_kind_from_string("fd") == eval::EmbeddingKind::kDisentangled);
  CHECK_THROWS_AS(eval::embedding_kind_from_string("fx"), InputError);
}

TEST_CASE("separation ratio") {
  const std::vector<int> labels{0, 0, 1, 1};
  const std::vector<std::vector<float>> same{{1, 1}, {1, 1}, {1, 1}, {1, 1}};
  CHECK(eval::separation_ratio(same, labels) == 0.0);
  const std::vector<std::vector<float>> tight{{0, 0}, {0, 0}, {10, 0}, {10, 0}};
  CHECK(eval::separation_ratio(tight, labels) == doctest::Approx(10.0 / eval::kSpreadFloor));
  const std::vector<std::vector<float>> spread{{0, 1}, {0, -1}, {4, 1}, {4, -1}};
  CHECK(eval::separation_ratio(spread, labels) == doctest::Approx(4.0));

  // Two unit Gaussians 4 apart in 1-D: mean |x - c| = sqrt(2 / pi).
  std::mt19937_64 g(2);
  std::normal_distribution<float> n;
  std::vector<std::vector<float>> pts;
  std::vector<int> y;
  for (int i = 0; i < 200000; ++i) {
    y.push_back(i % 2);
    pts.push_back({n(g) + (i % 2 ? 4.0f : 0.0f)});
  }
  CHECK(eval::separation_ratio(pts, y) ==
        doctest::Approx(4.0 / std::sqrt(2.0 / std::numbers::pi)).epsilon(0.01));
  CHECK_THROWS_AS(eval::separation_ratio(same, std::vector<int>{0, 0, 0, 0}), InputError);
}
