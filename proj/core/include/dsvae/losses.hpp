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

#include <cstdint>
#include <span>
#include <string>

#include "dsvae/ops.hpp"

namespace dsvae::loss {

using ad::BasicVar;

/// Lower/upper bound applied to probabilities before any log.
inline constexpr double kProbabilityFloor = 1e-7;

struct LossWeights {
  double w_recon = 1.0;
  double w_kl = 1.0;
  double w_cos = 1.0;
  double w_con = 1.0;
  double w_bce = 1.0;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Per-term values of one batch. Terms a stage does not use stay zero.
struct LossReport {
  double recon = 0.0;
  double kl = 0.0;
  double cos = 0.0;
  double con = 0.0;
  double bce = 0.0;
  double total = 0.0;
};

/// Newline-free JSON record: step, the per-term values, total and lr, with
/// six significant digits.
std::string format_log_record(std::uint64_t step, const LossReport& r,
                              double lr, int stage);

/// Binary CosFace head: two learned class vectors, normalised before use.
struct CosFaceHead {
  ad::Parameter weights;  // [2, latent_dim]
  double scale = 30.0;
  double margin = 0.35;

  void validate() const;
};

/// Mean over batch and elements of (x - x_rec)^2.
template <class T>
BasicVar<T> recon_loss(const BasicVar<T>& x, const BasicVar<T>& x_rec);

/// KL(N(mu, exp(logvar)) || N(0, I)) = 0.5 sum_d (mu^2 + e^logvar - 1 -
/// logvar), averaged over the batch. mu, logvar: [N, d].
template <class T>
BasicVar<T> kl_loss(const BasicVar<T>& mu, const BasicVar<T>& logvar);

/// Large-margin cosine loss over two classes. f: [N, d]; class_weights:
/// [2, d]; labels in {0, 1}.
template <class T>
BasicVar<T> cosface_loss(const BasicVar<T>& f, std::span<const int> labels,
                         const BasicVar<T>& class_weights, double scale,
                         double margin);

/// Mean |A| of the bona fide (label 0) maps; zero when the batch has none.
/// maps: [N, ...].
template <class T>
BasicVar<T> concentration_loss(const BasicVar<T>& maps,
                               std::span<const int> labels);

/// Mean binary cross-entropy with y = 1 for synthetic. probs: [N] or [N, 1],
/// clamped to [1e-7, 1 - 1e-7].
template <class T>
BasicVar<T> bce_loss(const BasicVar<T>& probs, std::span<const int> labels);

struct StageLoss {
  ad::Var total;
  LossReport report;
};

/// w_recon * recon + w_kl * kl.
StageLoss stage1_loss(const ad::Var& x, const ad::Var& x_rec,
                      const ad::Var& mu, const ad::Var& logvar,
                      const LossWeights& w);

struct Stage2Inputs {
  ad::Var x;
  ad::Var x_rec;      // joint reconstruction
  ad::Var mu_d;       // disentangled posterior
  ad::Var logvar_d;
  ad::Var f_d;        // sampled disentangled feature
  ad::Var maps;       // activation maps
  ad::Var probs;      // classifier output
  std::span<const int> labels;
};

/// w_recon * recon + w_cos * cos + w_con * con + w_kl * kl + w_bce * bce.
StageLoss stage2_loss(const Stage2Inputs& in, const ad::Var& class_weights,
                      const CosFaceHead& head, const LossWeights& w);

}  // namespace dsvae::loss
