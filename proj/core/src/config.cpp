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

#include "dsvae/config.hpp"

#include <cmath>
#include <set>

#include "dsvae/data_io.hpp"
#include "dsvae/error.hpp"
#include "json.hpp"

namespace dsvae {
namespace {

using nlohmann::json;

template <class V>
V get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config key '") + key + "': " + e.what(), 0);
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ParseError("unknown " + where + " key '" + k + "'", 0);
  }
}

}  // namespace

StageConfig StageConfig::stage1_defaults() {
  StageConfig c;
  c.stage = 1;
  c.optimizer.mode = ad::OptimizerMode::kAdam;
  c.optimizer.learning_rate = 1e-3;
  c.optimizer.lr_decay = 5e-7;
  c.optimizer.weight_decay = 0.0;
  c.batch_size = 32;
  c.max_iterations = 300;
  c.epochs = 0;
  return c;
}

StageConfig StageConfig::stage2_defaults() {
  StageConfig c;
  c.stage = 2;
  c.optimizer.mode = ad::OptimizerMode::kAdamW;
  c.optimizer.learning_rate = 1e-4;
  c.optimizer.weight_decay = 1e-3;
  c.optimizer.lr_decay = 0.0;
  c.batch_size = 32;
  c.max_iterations = 0;
  c.epochs = 30;
  return c;
}

void StageConfig::validate() const {
  if (stage != 1 && stage != 2) throw InputError("stage must be 1 or 2");
  const auto& o = optimizer;
  if (!(o.learning_rate > 0.0) || !std::isfinite(o.learning_rate)) {
    throw InputError("learning_rate must be positive");
  }
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0) || !(o.beta2 >= 0.0 && o.beta2 < 1.0)) {
    throw InputError("beta1 and beta2 must lie in [0, 1)");
  }
  if (!(o.epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (!(o.weight_decay >= 0.0)) throw InputError("weight_decay must be >= 0");
  if (!(o.lr_decay >= 0.0 && o.lr_decay < 1.0)) {
    throw InputError("lr_decay must lie in [0, 1)");
  }
  if (batch_size == 0) throw InputError("batch_size must be positive");
  if (stage == 1 && max_iterations == 0) {
    throw InputError("stage 1 needs max_iterations > 0");
  }
  if (stage == 2 && epochs == 0) throw InputError("stage 2 needs epochs > 0");
  if (latent_dim == 0) throw InputError("latent_dim must be positive");
  if (!(cosface_scale > 0.0) || !(cosface_margin >= 0.0 && cosface_margin < 1.0)) {
    throw InputError("cosface_scale must be > 0 and cosface_margin in [0, 1)");
  }
  loss_weights.validate();
}

StageConfig parse_stage_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0);
  }
  if (!j.is_object()) throw ParseError("config must be a JSON object", 0);
  reject_unknown(j,
                 {"stage", "optimizer", "learning_rate", "beta1", "beta2",
                  "epsilon", "weight_decay", "lr_decay", "batch_size",
                  "max_iterations", "epochs", "seed", "loss_weights",
                  "convergence_threshold", "latent_dim", "cosface_scale",
                  "cosface_margin"},
                 "config");
  const int stage = j.contains("stage") ? get_as<int>(j, "stage") : 1;
  if (stage != 1 && stage != 2) throw ParseError("stage must be 1 or 2", 0);
  StageConfig c = stage == 1 ? StageConfig::stage1_defaults()
                             : StageConfig::stage2_defaults();
  auto& o = c.optimizer;
  if (j.contains("optimizer")) {
    try {
      o.mode = ad::optimizer_mode_from_string(get_as<std::string>(j, "optimizer"));
    } catch (const InputError& e) {
      throw ParseError(e.what(), 0);
    }
  }
  auto opt = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = get_as<std::decay_t<decltype(field)>>(j, key);
  };
  opt("learning_rate", o.learning_rate);
  opt("beta1", o.beta1);
  opt("beta2", o.beta2);
  opt("epsilon", o.epsilon);
  opt("weight_decay", o.weight_decay);
  opt("lr_decay", o.lr_decay);
  opt("batch_size", c.batch_size);
  opt("max_iterations", c.max_iterations);
  opt("epochs", c.epochs);
  opt("seed", c.seed);
  opt("latent_dim", c.latent_dim);
  opt("cosface_scale", c.cosface_scale);
  opt("cosface_margin", c.cosface_margin);
  if (j.contains("convergence_threshold") && !j["convergence_threshold"].is_null()) {
    c.convergence_threshold = get_as<double>(j, "convergence_threshold");
  }
  if (j.contains("loss_weights")) {
    const json& w = j["loss_weights"];
    if (!w.is_object()) throw ParseError("loss_weights must be an object", 0);
    reject_unknown(w, {"w_recon", "w_kl", "w_cos", "w_con", "w_bce"},
                   "loss_weights");
    auto& lw = c.loss_weights;
    auto wopt = [&w](const char* key, double& field) {
      if (w.contains(key)) field = get_as<double>(w, key);
    };
    wopt("w_recon", lw.w_recon);
    wopt("w_kl", lw.w_kl);
    wopt("w_cos", lw.w_cos);
    wopt("w_con", lw.w_con);
    wopt("w_bce", lw.w_bce);
  }
  c.validate();
  return c;
}

StageConfig load_stage_config(const std::filesystem::path& path) {
  return parse_stage_config(io::read_text(path));
}

std::string format_stage_config(const StageConfig& c) {
  const auto& o = c.optimizer;
  json j = {
      {"stage", c.stage},
      {"optimizer", ad::to_string(o.mode)},
      {"learning_rate", o.learning_rate},
      {"beta1", o.beta1},
      {"beta2", o.beta2},
      {"epsilon", o.epsilon},
      {"weight_decay", o.weight_decay},
      {"lr_decay", o.lr_decay},
      {"batch_size", c.batch_size},
      {"max_iterations", c.max_iterations},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"latent_dim", c.latent_dim},
      {"cosface_scale", c.cosface_scale},
      {"cosface_margin", c.cosface_margin},
      {"loss_weights",
       {{"w_recon", c.loss_weights.w_recon},
        {"w_kl", c.loss_weights.w_kl},
        {"w_cos", c.loss_weights.w_cos},
        {"w_con", c.loss_weights.w_con},
        {"w_bce", c.loss_weights.w_bce}}},
  };
  j["convergence_threshold"] = c.convergence_threshold
                                   ? json(*c.convergence_threshold)
                                   : json(nullptr);
  return j.dump(2) + "\n";
}

}  // namespace dsvae
