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

#include "dsvae/training.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "dsvae/error.hpp"
#include "dsvae/evaluation.hpp"

namespace dsvae::train {
namespace {

nn::Architecture architecture_for(const dsp::FrontendConfig& fe, std::size_t latent_dim) {
  nn::Architecture a;
  a.n_mels = fe.n_mels;
  a.target_frames = fe.norm.target_frames;
  a.latent_dim = latent_dim;
  return a;
}

void check_features(const data::Dataset& ds, const nn::Architecture& a,
                    const char* what) {
  const ad::Shape want{a.n_mels, a.target_frames};
  for (const auto& e : ds.examples) {
    if (e.features.shape() != want) {
      throw DimensionError(std::string(what) + ": clip " + e.clip_id + " has features " +
                           ad::shape_str(e.features.shape()) + ", model expects " +
                           ad::shape_str(want));
    }
  }
}

// Visits the data in shuffled passes; a new permutation starts each pass.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
      : order_(n), batch_(batch), rng_(seed), pos_(n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  bool at_pass_start() const { return pos_ >= order_.size(); }

  std::vector<std::size_t> next() {
    if (at_pass_start()) {
      rng_.shuffle(std::span(order_));
      pos_ = 0;
      ++passes_;
    }
    const std::size_t end = std::min(order_.size(), pos_ + batch_);
    std::vector<std::size_t> idx(order_.begin() + pos_, order_.begin() + end);
    pos_ = end;
    return idx;
  }

  std::uint64_t passes() const { return passes_; }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  Rng rng_;
  std::size_t pos_;
  std::uint64_t passes_ = 0;
};

ad::Tensor gather(const data::Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<const ad::Tensor*> items;
  items.reserve(idx.size());
  for (std::size_t i : idx) items.push_back(&ds.examples[i].features);
  return nn::make_batch(items);
}

double validation_accuracy(nn::ModelBundle& bundle, const data::Dataset& val) {
  const auto records = eval::score_examples(bundle, val.examples);
  return eval::balanced_accuracy(records);
}

}  // namespace

ckpt::Checkpoint train_stage1(const data::Dataset& corpus, const StageConfig& cfg,
                              const dsp::FrontendConfig& frontend,
                              const Hooks& hooks) {
  if (cfg.stage != 1) throw InputError("train-stage1 needs a config with stage 1");
  cfg.validate();
  if (corpus.empty()) throw InputError("stage-1 corpus is empty");
  const auto arch = architecture_for(frontend, cfg.latent_dim);
  check_features(corpus, arch, "stage 1");

  ckpt::Checkpoint c;
  c.bundle = nn::ModelBundle::stage1(arch, cfg.seed);
  c.frontend = frontend;
  c.stage = 1;
  auto params = c.bundle.trainable_parameters();
  c.optimizer = ad::make_optimizer_state(cfg.optimizer, params);

  BatchSampler sampler(corpus.size(), cfg.batch_size, derive_seed(cfg.seed, 11));
  Rng noise(derive_seed(cfg.seed, 12));
  double smoothed = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t step = 0;
  while (step < cfg.max_iterations) {
    const ad::Tensor x = gather(corpus, sampler.next());
    c.bundle.zero_grad();
    ad::Tape tape;
    const ad::Var xv = tape.constant(x);
    const auto dist = nn::encode(c.bundle, nn::LatentSource::kGeneral, xv);
    const auto z = nn::reparameterize(dist, noise);
    const ad::Var x_rec = nn::decode_general(c.bundle, z);
    const auto sl = loss::stage1_loss(xv, x_rec, dist.mu, dist.logvar, cfg.loss_weights);
    tape.backward(sl.total);
    if (hooks.on_step) hooks.on_step({1, step, sampler.passes(), sl.report, c.bundle});
    const double lr = c.optimizer.current_lr;
    ad::optimizer_step(params, c.optimizer);
    if (hooks.log) hooks.log(loss::format_log_record(step, sl.report, lr, 1));
    c.loss_trace.push_back(sl.report.total);
    ++step;

    smoothed = std::isnan(smoothed)
                   ? sl.report.total
                   : kLossSmoothing * smoothed + (1.0 - kLossSmoothing) * sl.report.total;
    if (cfg.convergence_threshold && smoothed < *cfg.convergence_threshold) break;
  }
  c.iteration = step;
  c.epoch = sampler.passes();
  return c;
}

ckpt::Checkpoint train_stage2(const data::Dataset& train,
                              const data::Dataset& validation,
                              const ckpt::Checkpoint& stage1, const StageConfig& cfg,
                              const Hooks& hooks) {
  if (cfg.stage != 2) throw InputError("train-stage2 needs a config with stage 2");
  cfg.validate();
  if (stage1.stage != 1 || !stage1.bundle.has(nn::Subnet::kGeneralEncoder)) {
    throw FormatError("stage-1 checkpoint expected (stage " +
                          std::to_string(stage1.stage) + " given)",
                      0);
  }
  if (stage1.bundle.arch.latent_dim != cfg.latent_dim) {
    throw FormatError("stage-1 checkpoint has latent_dim " +
                          std::to_string(stage1.bundle.arch.latent_dim) +
                          ", config asks for " + std::to_string(cfg.latent_dim),
                      0);
  }
  if (train.empty()) throw InputError("stage-2 training set is empty");
  if (!train.has_both_labels()) {
    throw InputError("stage-2 training set needs both bona fide and synthetic clips");
  }
  if (!validation.has_both_labels()) {
    throw InputError("validation set needs both bona fide and synthetic clips");
  }
  check_features(train, stage1.bundle.arch, "stage 2");
  check_features(validation, stage1.bundle.arch, "validation");

  ckpt::Checkpoint c;
  c.bundle = nn::ModelBundle::stage2(stage1.bundle, cfg.seed, cfg.cosface_scale,
                                     cfg.cosface_margin);
  c.frontend = stage1.frontend;
  c.stage = 2;
  auto params = c.bundle.trainable_parameters();
  c.optimizer = ad::make_optimizer_state(cfg.optimizer, params);

  BatchSampler sampler(train.size(), cfg.batch_size, derive_seed(cfg.seed, 21));
  Rng noise(derive_seed(cfg.seed, 22));
  std::uint64_t step = 0;
  for (std::uint64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t batches = 0;
    do {
      const auto idx = sampler.next();
      const ad::Tensor x = gather(train, idx);
      std::vector<int> labels;
      for (std::size_t i : idx) labels.push_back(train.examples[i].label);

      c.bundle.zero_grad();
      ad::Tape tape;
      const ad::Var xv = tape.constant(x);
      const auto dist_g = nn::encode(c.bundle, nn::LatentSource::kGeneral, xv);
      const auto f_g = nn::reparameterize(dist_g, noise);
      const auto dist_d = nn::encode(c.bundle, nn::LatentSource::kDisentangled, xv);
      const auto f_d = nn::reparameterize(dist_d, noise);
      const ad::Var x_rec = nn::decode_joint(c.bundle, nn::concat_features(f_g, f_d));
      const auto map = nn::decode_activation(c.bundle, f_d);
      const ad::Var x_map = nn::apply_activation(map, xv);
      const ad::Var probs = nn::classify(c.bundle, x_map);
      const ad::Var class_weights = tape.parameter(
          c.bundle.cosface->weights, c.bundle.is_frozen(nn::Subnet::kCosFace));
      const loss::Stage2Inputs in{xv,           x_rec, dist_d.mu, dist_d.logvar,
                                  f_d.z,        map.values, probs, labels};
      const auto sl = loss::stage2_loss(in, class_weights, *c.bundle.cosface,
                                        cfg.loss_weights);
      tape.backward(sl.total);
      if (hooks.on_step) hooks.on_step({2, step, epoch, sl.report, c.bundle});
      const double lr = c.optimizer.current_lr;
      ad::optimizer_step(params, c.optimizer);
      if (hooks.log) hooks.log(loss::format_log_record(step, sl.report, lr, 2));
      c.loss_trace.push_back(sl.report.total);
      loss_sum += sl.report.total;
      ++batches;
      ++step;
    } while (!sampler.at_pass_start());

    const double acc = validation_accuracy(c.bundle, validation);
    c.history.push_back({epoch, loss_sum / static_cast<double>(batches), acc});
    c.iteration = step;
    c.epoch = epoch;
    if (hooks.on_epoch) hooks.on_epoch(c);
  }
  return c;
}

std::size_t select_best_index(std::span<const double> acc,
                              std::span<const std::uint64_t> epochs) {
  if (acc.empty()) throw InputError("select-best needs at least one checkpoint");
  if (acc.size() != epochs.size()) {
    throw ContractError("select_best_index: accuracies and epochs differ in length");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < acc.size(); ++i) {
    if (acc[i] > acc[best] || (acc[i] == acc[best] && epochs[i] < epochs[best])) {
      best = i;
    }
  }
  return best;
}

Selection select_best(std::span<ckpt::Checkpoint> candidates,
                      const data::Dataset& validation) {
  if (candidates.empty()) throw InputError("select-best needs at least one checkpoint");
  Selection s;
  std::vector<std::uint64_t> epochs;
  for (auto& c : candidates) {
    s.accuracies.push_back(validation_accuracy(c.bundle, validation));
    epochs.push_back(c.epoch);
  }
  s.index = select_best_index(s.accuracies, epochs);
  s.balanced_accuracy = s.accuracies[s.index];
  return s;
}

Selection select_best(std::span<const std::filesystem::path> candidates,
                      const data::Dataset& validation) {
  if (candidates.empty()) throw InputError("select-best needs at least one checkpoint");
  Selection s;
  std::vector<std::uint64_t> epochs;
  for (const auto& path : candidates) {
    auto c = ckpt::load_checkpoint(path);
    if (!c.bundle.has(nn::Subnet::kClassifier)) {
      throw InputError(path.string() + " is not a stage-2 checkpoint");
    }
    s.accuracies.push_back(validation_accuracy(c.bundle, validation));
    epochs.push_back(c.epoch);
  }
  s.index = select_best_index(s.accuracies, epochs);
  s.balanced_accuracy = s.accuracies[s.index];
  return s;
}

Selection select_best_from_history(std::span<const ckpt::Checkpoint> candidates) {
  if (candidates.empty()) throw InputError("select-best needs at least one checkpoint");
  Selection s;
  std::vector<std::uint64_t> epochs;
  for (const auto& c : candidates) {
    if (c.history.empty() || c.history.back().epoch != c.epoch) {
      throw InputError("checkpoint of epoch " + std::to_string(c.epoch) +
                       " has no recorded validation accuracy");
    }
    s.accuracies.push_back(c.history.back().val_balanced_accuracy);
    epochs.push_back(c.epoch);
  }
  s.index = select_best_index(s.accuracies, epochs);
  s.balanced_accuracy = s.accuracies[s.index];
  return s;
}

}  // namespace dsvae::train
