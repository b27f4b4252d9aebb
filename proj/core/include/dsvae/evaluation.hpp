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

#pragma once

#include <span>
#include <string>
#include <vector>

#include "dsvae/dataset.hpp"
#include "dsvae/model.hpp"

namespace dsvae::eval {

/// Accuracy-style metrics call a clip synthetic when score >= threshold.
inline constexpr double kDecisionThreshold = 0.5;
/// Floor on the within-class spread in separation_ratio.
inline constexpr double kSpreadFloor = 1e-12;

struct ScoreRecord {
  std::string clip_id;
  double score = 0.0;  // probability of synthetic
  int label = 0;       // 1 = synthetic
  std::string synthesizer_id;
};

/// Scores in dataset order, `batch` clips per forward pass.
std::vector<ScoreRecord> score_examples(nn::ModelBundle& bundle,
                                        std::span<const data::Example> examples,
                                        std::size_t batch = 64);

struct ScoreRun {
  std::vector<ScoreRecord> records;
  std::vector<data::LoadFailure> failures;
};

/// Loads and scores every manifest row; unreadable clips are reported in
/// `failures` and skipped.
ScoreRun score_dataset(nn::ModelBundle& bundle, const dsp::Frontend& frontend,
                       std::span<const io::ManifestRecord> manifest);

struct RocPoint {
  double threshold;
  double fpr;  // bona fide scored >= threshold
  double fnr;  // synthetic scored < threshold
};

/// One point per distinct score, plus -inf and +inf, thresholds ascending.
std::vector<RocPoint> roc_curve(std::span<const double> bonafide,
                                std::span<const double> synthetic);

struct EerResult {
  double eer;
  double threshold;
};

/// Walks the ROC points in threshold order and returns the rate where
/// FNR - FPR first reaches zero, interpolating linearly between the two
/// bracketing points.
EerResult compute_eer(std::span<const double> bonafide,
                      std::span<const double> synthetic);
EerResult compute_eer(std::span<const ScoreRecord> records);

/// 0.5 (recall_bonafide + recall_synthetic).
double balanced_accuracy(std::span<const ScoreRecord> records,
                         double threshold = kDecisionThreshold);

struct GroupAccuracy {
  std::string synthesizer_id;
  double accuracy;
  std::size_t count;
};

/// Per synthesizer id, in order of first appearance.
std::vector<GroupAccuracy> per_synthesizer_report(
    std::span<const ScoreRecord> records, double threshold = kDecisionThreshold);

struct EvalReport {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double balanced_accuracy = 0.0;
  std::vector<GroupAccuracy> per_synthesizer;
  std::size_t n_bonafide = 0;
  std::size_t n_synthetic = 0;
  std::vector<data::LoadFailure> failures;
};

EvalReport evaluate(std::span<const ScoreRecord> records);

std::string format_report_json(const EvalReport& report);
/// Header `clip_id,label,synthesizer_id,score`, scores with %.6g.
std::string format_scores_csv(std::span<const ScoreRecord> records);

enum class EmbeddingKind { kGeneral, kDisentangled, kBoth };

/// "fg", "fd" or "both".
EmbeddingKind embedding_kind_from_string(const std::string& s);

struct EmbeddingRow {
  std::string clip_id;
  int label = 0;
  std::string synthesizer_id;
  std::vector<float> values;
};

/// Mean latents per clip; kBoth concatenates [F_G | F_D].
std::vector<EmbeddingRow> export_embeddings(nn::ModelBundle& bundle,
                                            std::span<const data::Example> examples,
                                            EmbeddingKind which,
                                            std::size_t batch = 64);

/// Header `clip_id,label,synthesizer_id,f_0,...`, values with %.9g.
std::string format_embeddings_csv(std::span<const EmbeddingRow> rows);

/// Distance between the two class centroids divided by the mean distance of
/// every point to its own class centroid (floored at kSpreadFloor).
double separation_ratio(std::span<const std::vector<float>> points,
                        std::span<const int> labels);
double separation_ratio(std::span<const EmbeddingRow> rows);

}  // namespace dsvae::eval
