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
#include <vector>

#include "dsvae/tape.hpp"

namespace dsvae::ad {

enum class OptimizerMode { kAdam, kAdamW };

std::string to_string(OptimizerMode mode);
OptimizerMode optimizer_mode_from_string(const std::string& s);

struct OptimizerHyper {
  OptimizerMode mode = OptimizerMode::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled; only applied in AdamW mode
  double lr_decay = 0.0;      // lr <- lr * (1 - lr_decay) after every step

  friend bool operator==(const OptimizerHyper&, const OptimizerHyper&) = default;
};

/// Bias-corrected Adam moments for one ordered list of parameters.
struct OptimizerState {
  OptimizerHyper hyper;
  double current_lr = 0.0;
  std::uint64_t step_count = 0;
  std::vector<std::string> names;  // parameter names, in update order
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  bool initialized() const noexcept { return !names.empty(); }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// Zeroed moments matching `params`.
OptimizerState make_optimizer_state(const OptimizerHyper& hyper,
                                    std::span<Parameter* const> params);

/// One update of every parameter in `params` from its `grad` buffer. A
/// parameter whose grad is empty is treated as having zero gradient.
///
/// Adam:   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///         p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
/// AdamW:  p <- p - lr * wd * p  first, then the Adam update.
void optimizer_step(std::span<Parameter* const> params, OptimizerState& state);

}  // namespace dsvae::ad
