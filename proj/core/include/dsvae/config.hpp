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
#include <filesystem>
#include <optional>
#include <string>

#include "dsvae/losses.hpp"
#include "dsvae/optim.hpp"

namespace dsvae {

/// Hyperparameters of one training stage. JSON keys mirror the field names;
/// the optimizer fields sit at the top level.
struct StageConfig {
  int stage = 1;
  ad::OptimizerHyper optimizer;
  std::size_t batch_size = 32;
  std::uint64_t max_iterations = 300;  // stage 1
  std::size_t epochs = 30;             // stage 2
  std::uint64_t seed = 0;
  loss::LossWeights loss_weights;
  /// Stage 1 stops early once the smoothed loss drops below this.
  std::optional<double> convergence_threshold;
  std::size_t latent_dim = 32;
  double cosface_scale = 30.0;
  double cosface_margin = 0.35;

  /// Adam, lr 1e-3, lr_decay 5e-7, batch 32, 300 iterations.
  static StageConfig stage1_defaults();
  /// AdamW, lr 1e-4, weight_decay 1e-3, batch 32, 30 epochs.
  static StageConfig stage2_defaults();

  void validate() const;

  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

/// Keys absent from the document keep the defaults of its "stage" (1 when
/// missing). Unknown keys and wrong types raise ParseError.
StageConfig parse_stage_config(const std::string& json_text);
StageConfig load_stage_config(const std::filesystem::path& path);
std::string format_stage_config(const StageConfig& cfg);

}  // namespace dsvae
