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

#include "dsvae/optim.hpp"

#include <cmath>

namespace dsvae::ad {

std::string to_string(OptimizerMode mode) {
  return mode == OptimizerMode::kAdam ? "adam" : "adamw";
}

OptimizerMode optimizer_mode_from_string(const std::string& s) {
  if (s == "adam") return OptimizerMode::kAdam;
  if (s == "adamw") return OptimizerMode::kAdamW;
  throw InputError("unknown optimizer '" + s + "' (expected adam or adamw)");
}

OptimizerState make_optimizer_state(const OptimizerHyper& hyper,
                                    std::span<Parameter* const> params) {
  if (params.empty()) {
    throw ContractError("optimizer needs at least one parameter");
  }
  OptimizerState s;
  s.hyper = hyper;
  s.current_lr = hyper.learning_rate;
  for (const Parameter* p : params) {
    s.names.push_back(p->name);
    s.first_moment.emplace_back(p->value.shape());
    s.second_moment.emplace_back(p->value.shape());
  }
  return s;
}

void optimizer_step(std::span<Parameter* const> params, OptimizerState& state) {
  if (!state.initialized()) {
    throw ContractError("optimizer_step on uninitialized state");
  }
  if (params.size() != state.names.size()) {
    throw ContractError("optimizer_step: " + std::to_string(params.size()) +
                        " parameters for a state tracking " +
                        std::to_string(state.names.size()));
  }
  const OptimizerHyper& h = state.hyper;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const float lr = static_cast<float>(state.current_lr);
  const float b1 = static_cast<float>(h.beta1);
  const float b2 = static_cast<float>(h.beta2);
  const float eps = static_cast<float>(h.epsilon);
  const float bc1 = static_cast<float>(1.0 - std::pow(h.beta1, t));
  const float bc2 = static_cast<float>(1.0 - std::pow(h.beta2, t));
  const bool decoupled =
      h.mode == OptimizerMode::kAdamW && h.weight_decay != 0.0;
  const float decay = static_cast<float>(state.current_lr * h.weight_decay);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    if (p.name != state.names[i] || m.shape() != p.value.shape()) {
      throw ContractError("optimizer_step: parameter '" + p.name +
                          "' does not match state entry '" + state.names[i] +
                          "'");
    }
    const bool has_grad = !p.grad.empty();
    if (has_grad && p.grad.shape() != p.value.shape()) {
      throw ContractError("optimizer_step: gradient shape mismatch for '" +
                          p.name + "'");
    }
    auto pv = p.value.data();
    auto mv = m.data();
    auto vv = v.data();
    for (std::size_t j = 0; j < pv.size(); ++j) {
      const float g = has_grad ? p.grad[j] : 0.0f;
      if (decoupled) pv[j] -= decay * pv[j];
      mv[j] = b1 * mv[j] + (1.0f - b1) * g;
      vv[j] = b2 * vv[j] + (1.0f - b2) * g * g;
      const float mhat = mv[j] / bc1;
      const float vhat = vv[j] / bc2;
      pv[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  state.current_lr *= (1.0 - h.lr_decay);
}

}  // namespace dsvae::ad
