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

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dsvae/checkpoint.hpp"
#include "dsvae/config.hpp"
#include "dsvae/dataset.hpp"

namespace dsvae::train {

/// State visible to a step observer: gradients are filled in, the optimizer
/// has not yet applied them.
struct StepInfo {
  int stage;
  std::uint64_t step;   // 0-based
  std::uint64_t epoch;  // 1-based
  const loss::LossReport& report;
  nn::ModelBundle& bundle;
};

struct Hooks {
  /// One NDJSON record per step.
  std::function<void(const std::string&)> log;
  std::function<void(const StepInfo&)> on_step;
  /// Stage 2: called once per epoch with that epoch's checkpoint.
  std::function<void(const ckpt::Checkpoint&)> on_epoch;
};

/// Exponential smoothing used for the convergence test.
inline constexpr double kLossSmoothing = 0.9;

/// Trains E_G and D on reconstruction + KL, ignoring labels, until
/// cfg.max_iterations steps or the smoothed loss falls below
/// cfg.convergence_threshold.
ckpt::Checkpoint train_stage1(const data::Dataset& corpus, const StageConfig& cfg,
                              const dsp::FrontendConfig& frontend,
                              const Hooks& hooks = {});

/// Loads and freezes E_G from `stage1`, then trains E_D, D_rec, D_map, C and
/// the CosFace head for cfg.epochs epochs. Each epoch's checkpoint carries
/// the balanced accuracy on `validation`. Returns the final epoch.
ckpt::Checkpoint train_stage2(const data::Dataset& train,
                              const data::Dataset& validation,
                              const ckpt::Checkpoint& stage1, const StageConfig& cfg,
                              const Hooks& hooks = {});

/// Index of the highest accuracy; ties go to the smallest epoch.
std::size_t select_best_index(std::span<const double> accuracies,
                              std::span<const std::uint64_t> epochs);

struct Selection {
  std::size_t index;
  double balanced_accuracy;
  std::vector<double> accuracies;  // one per candidate
};

/// Re-evaluates every checkpoint on `validation`.
Selection select_best(std::span<ckpt::Checkpoint> candidates,
                      const data::Dataset& validation);
/// Same, loading one file at a time.
Selection select_best(std::span<const std::filesystem::path> candidates,
                      const data::Dataset& validation);
/// From the accuracy each checkpoint recorded for its own epoch.
Selection select_best_from_history(std::span<const ckpt::Checkpoint> candidates);

}  // namespace dsvae::train
