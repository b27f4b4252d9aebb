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

#include "dsvae/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "dsvae/error.hpp"
#include "json.hpp"

namespace dsvae::eval {
namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string label_name(int y) {
  return io::to_string(y == 1 ? io::Label::kSynthetic : io::Label::kBonafide);
}

template <class Fn>
void for_each_batch(std::span<const data::Example> examples, std::size_t batch,
                    Fn&& fn) {
  if (batch == 0) throw ContractError("batch size must be positive");
  for (std::size_t start = 0; start < examples.size(); start += batch) {
    const std::size_t end = std::min(examples.size(), start + batch);
    std::vector<const ad::Tensor*> items;
    for (std::size_t i = start; i < end; ++i) items.push_back(&examples[i].features);
    fn(start, end, nn::make_batch(items));
  }
}

void split_scores(std::span<const ScoreRecord> records, std::vector<double>& bona,
                  std::vector<double>& syn) {
  for (const auto& r : records) (r.label == 1 ? syn : bona).push_back(r.score);
}

}  // namespace

std::vector<ScoreRecord> score_examples(nn::ModelBundle& bundle,
                                        std::span<const data::Example> examples,
                                        std::size_t batch) {
  std::vector<ScoreRecord> out;
  out.reserve(examples.size());
  for_each_batch(examples, batch,
                 [&](std::size_t start, std::size_t end, const ad::Tensor& x) {
                   const auto r = nn::infer(bundle, x);
                   for (std::size_t i = start; i < end; ++i) {
                     const auto& e = examples[i];
                     out.push_back({e.clip_id, r.scores[i - start], e.label,
                                    e.synthesizer_id});
                   }
                 });
  return out;
}

ScoreRun score_dataset(nn::ModelBundle& bundle, const dsp::Frontend& frontend,
                       std::span<const io::ManifestRecord> manifest) {
  auto ds = data::load_dataset(manifest, frontend, data::OnError::kCollect);
  ScoreRun run;
  run.records = score_examples(bundle, ds.examples);
  run.failures = std::move(ds.failures);
  return run;
}

std::vector<RocPoint> roc_curve(std::span<const double> bonafide,
                                std::span<const double> synthetic) {
  if (bonafide.empty() || synthetic.empty()) {
    throw InputError("ROC needs at least one bona fide and one synthetic score");
  }
  std::vector<double> b(bonafide.begin(), bonafide.end());
  std::vector<double> s(synthetic.begin(), synthetic.end());
  std::sort(b.begin(), b.end());
  std::sort(s.begin(), s.end());
  std::vector<double> thresholds;
  thresholds.reserve(b.size() + s.size() + 2);
  thresholds.push_back(-std::numeric_limits<double>::infinity());
  thresholds.insert(thresholds.end(), b.begin(), b.end());
  thresholds.insert(thresholds.end(), s.begin(), s.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double nb = static_cast<double>(b.size());
  const double ns = static_cast<double>(s.size());
  std::vector<RocPoint> roc;
  roc.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto b_below = std::lower_bound(b.begin(), b.end(), t) - b.begin();
    const auto s_below = std::lower_bound(s.begin(), s.end(), t) - s.begin();
    roc.push_back({t, (nb - static_cast<double>(b_below)) / nb,
                   static_cast<double>(s_below) / ns});
  }
  return roc;
}

EerResult compute_eer(std::span<const double> bonafide,
                      std::span<const double> synthetic) {
  const auto roc = roc_curve(bonafide, synthetic);
  for (std::size_t i = 0; i < roc.size(); ++i) {
    const double d = roc[i].fnr - roc[i].fpr;
    if (d < 0.0) continue;
    if (d == 0.0) return {roc[i].fpr, roc[i].threshold};
    const RocPoint& a = roc[i - 1];
    const RocPoint& c = roc[i];
    const double da = a.fnr - a.fpr;
    const double alpha = -da / (d - da);
    const double eer = a.fpr + alpha * (c.fpr - a.fpr);
    double t;
    if (std::isinf(a.threshold)) {
      t = c.threshold;
    } else if (std::isinf(c.threshold)) {
      t = a.threshold;
    } else {
      t = a.threshold + alpha * (c.threshold - a.threshold);
    }
    return {eer, t};
  }
  throw std::logic_error("compute_eer: ROC never reached FNR >= FPR");
}

EerResult compute_eer(std::span<const ScoreRecord> records) {
  std::vector<double> bona, syn;
  split_scores(records, bona, syn);
  if (bona.empty() || syn.empty()) {
    throw InputError("EER needs both bona fide and synthetic clips (got " +
                     std::to_string(bona.size()) + " bona fide, " +
                     std::to_string(syn.size()) + " synthetic)");
  }
  return compute_eer(bona, syn);
}

double balanced_accuracy(std::span<const ScoreRecord> records, double threshold) {
  std::size_t n[2] = {0, 0}, correct[2] = {0, 0};
  for (const auto& r : records) {
    const int y = r.label == 1 ? 1 : 0;
    ++n[y];
    if ((r.score >= threshold ? 1 : 0) == y) ++correct[y];
  }
  if (n[0] == 0 || n[1] == 0) {
    throw InputError("balanced accuracy needs both bona fide and synthetic clips (got " +
                     std::to_string(n[0]) + " bona fide, " + std::to_string(n[1]) +
                     " synthetic)");
  }
  return 0.5 * (static_cast<double>(correct[0]) / static_cast<double>(n[0]) +
                static_cast<double>(correct[1]) / static_cast<double>(n[1]));
}

std::vector<GroupAccuracy> per_synthesizer_report(std::span<const ScoreRecord> records,
                                                  double threshold) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;
  for (const auto& r : records) {
    auto [it, fresh] = tally.try_emplace(r.synthesizer_id, 0, 0);
    if (fresh) order.push_back(r.synthesizer_id);
    ++it->second.second;
    if ((r.score >= threshold ? 1 : 0) == r.label) ++it->second.first;
  }
  std::vector<GroupAccuracy> out;
  for (const auto& id : order) {
    const auto [hit, n] = tally[id];
    out.push_back({id, static_cast<double>(hit) / static_cast<double>(n), n});
  }
  return out;
}

EvalReport evaluate(std::span<const ScoreRecord> records) {
  EvalReport r;
  const auto eer = compute_eer(records);
  r.eer = eer.eer;
  r.eer_threshold = eer.threshold;
  r.balanced_accuracy = balanced_accuracy(records);
  r.per_synthesizer = per_synthesizer_report(records);
  for (const auto& s : records) (s.label == 1 ? r.n_synthetic : r.n_bonafide)++;
  return r;
}

std::string format_report_json(const EvalReport& r) {
  using nlohmann::json;
  json groups = json::array();
  for (const auto& g : r.per_synthesizer) {
    groups.push_back(
        {{"synthesizer_id", g.synthesizer_id}, {"accuracy", g.accuracy}, {"count", g.count}});
  }
  json failures = json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"path", f.path}, {"error", f.message}});
  }
  json j = {{"eer", r.eer},
            {"eer_threshold", r.eer_threshold},
            {"balanced_accuracy", r.balanced_accuracy},
            {"per_synthesizer", groups},
            {"counts", {{"bonafide", r.n_bonafide}, {"synthetic", r.n_synthetic}}},
            {"failures", failures}};
  return j.dump(2) + "\n";
}

std::string format_scores_csv(std::span<const ScoreRecord> records) {
  std::string s = "clip_id,label,synthesizer_id,score\n";
  for (const auto& r : records) {
    s += r.clip_id + "," + label_name(r.label) + "," + r.synthesizer_id + "," +
         fmt("%.6g", r.score) + "\n";
  }
  return s;
}

EmbeddingKind embedding_kind_from_string(const std::string& s) {
  if (s == "fg") return EmbeddingKind::kGeneral;
  if (s == "fd") return EmbeddingKind::kDisentangled;
  if (s == "both") return EmbeddingKind::kBoth;
  throw InputError("unknown embedding kind '" + s + "' (expected fg, fd or both)");
}

std::vector<EmbeddingRow> export_embeddings(nn::ModelBundle& bundle,
                                            std::span<const data::Example> examples,
                                            EmbeddingKind which, std::size_t batch) {
  const bool want_g = which != EmbeddingKind::kDisentangled;
  const bool want_d = which != EmbeddingKind::kGeneral;
  if (want_g && !bundle.has(nn::Subnet::kGeneralEncoder)) {
    throw InputError("checkpoint has no general encoder for F_G embeddings");
  }
  if (want_d && !bundle.has(nn::Subnet::kDisentangledEncoder)) {
    throw InputError("checkpoint has no disentangled encoder for F_D embeddings");
  }
  const std::size_t d = bundle.arch.latent_dim;
  std::vector<EmbeddingRow> rows;
  rows.reserve(examples.size());
  for_each_batch(examples, batch,
                 [&](std::size_t start, std::size_t end, const ad::Tensor& x) {
                   ad::Tensor g, f;
                   if (want_g) g = nn::mean_latents(bundle, nn::LatentSource::kGeneral, x);
                   if (want_d) {
                     f = nn::mean_latents(bundle, nn::LatentSource::kDisentangled, x);
                   }
                   for (std::size_t i = start; i < end; ++i) {
                     const auto& e = examples[i];
                     EmbeddingRow row{e.clip_id, e.label, e.synthesizer_id, {}};
                     const std::size_t k = i - start;
                     if (want_g) {
                       row.values.insert(row.values.end(), g.data().begin() + k * d,
                                         g.data().begin() + (k + 1) * d);
                     }
                     if (want_d) {
                       row.values.insert(row.values.end(), f.data().begin() + k * d,
                                         f.data().begin() + (k + 1) * d);
                     }
                     rows.push_back(std::move(row));
                   }
                 });
  return rows;
}

std::string format_embeddings_csv(std::span<const EmbeddingRow> rows) {
  std::string s = "clip_id,label,synthesizer_id";
  const std::size_t width = rows.empty() ? 0 : rows.front().values.size();
  for (std::size_t i = 0; i < width; ++i) s += ",f_" + std::to_string(i);
  s += "\n";
  for (const auto& r : rows) {
    s += r.clip_id + "," + label_name(r.label) + "," + r.synthesizer_id;
    for (float v : r.values) s += "," + fmt("%.9g", v);
    s += "\n";
  }
  return s;
}

double separation_ratio(std::span<const std::vector<float>> points,
                        std::span<const int> labels) {
  if (points.size() != labels.size()) {
    throw DimensionError("separation_ratio: points and labels differ in length");
  }
  if (points.empty()) throw InputError("separation_ratio needs points");
  const std::size_t dim = points.front().size();
  std::vector<double> centroid[2] = {std::vector<double>(dim, 0.0),
                                     std::vector<double>(dim, 0.0)};
  std::size_t n[2] = {0, 0};
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim) throw DimensionError("separation_ratio: ragged points");
    const int y = labels[i] == 1 ? 1 : 0;
    ++n[y];
    for (std::size_t k = 0; k < dim; ++k) centroid[y][k] += points[i][k];
  }
  if (n[0] == 0 || n[1] == 0) {
    throw InputError("separation_ratio needs points from both classes");
  }
  for (int y = 0; y < 2; ++y) {
    for (double& c : centroid[y]) c /= static_cast<double>(n[y]);
  }
  double between = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double diff = centroid[0][k] - centroid[1][k];
    between += diff * diff;
  }
  between = std::sqrt(between);
  double spread = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& c = centroid[labels[i] == 1 ? 1 : 0];
    double d2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = points[i][k] - c[k];
      d2 += diff * diff;
    }
    spread += std::sqrt(d2);
  }
  spread /= static_cast<double>(points.size());
  return between / std::max(spread, kSpreadFloor);
}

double separation_ratio(std::span<const EmbeddingRow> rows) {
  std::vector<std::vector<float>> pts;
  std::vector<int> labels;
  for (const auto& r : rows) {
    pts.push_back(r.values);
    labels.push_back(r.label);
  }
  return separation_ratio(pts, labels);
}

}  // namespace dsvae::eval
