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

#include "dsvae/losses.hpp"

#include <cmath>
#include <cstdio>

namespace dsvae::loss {

using ad::BasicTensor;
using ad::Shape;

void LossWeights::validate() const {
  for (double w : {w_recon, w_kl, w_cos, w_con, w_bce}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InputError("loss weights must be finite and non-negative");
    }
  }
}

void CosFaceHead::validate() const {
  if (!(scale > 0.0) || !(margin >= 0.0 && margin < 1.0)) {
    throw ContractError("cosface head needs scale > 0 and 0 <= margin < 1");
  }
  if (weights.value.rank() != 2 || weights.value.extent(0) != 2) {
    throw DimensionError("cosface head weights must be [2, latent_dim], got " +
                         ad::shape_str(weights.value.shape()));
  }
}

namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void check_labels(std::span<const int> labels, std::size_t rows,
                  const char* op) {
  if (labels.size() != rows) {
    throw DimensionError(std::string(op) + ": " + std::to_string(labels.size()) +
                         " labels for a batch of " + std::to_string(rows));
  }
  for (int l : labels) {
    if (l != 0 && l != 1) {
      throw ContractError(std::string(op) + ": labels must be 0 or 1");
    }
  }
}

}  // namespace

std::string format_log_record(std::uint64_t step, const LossReport& r,
                              double lr, int stage) {
  std::string s = "{\"step\":" + std::to_string(step) +
                  ",\"stage\":" + std::to_string(stage) +
                  ",\"recon\":" + fmt6(r.recon) + ",\"kl\":" + fmt6(r.kl);
  if (stage == 2) {
    s += ",\"cos\":" + fmt6(r.cos) + ",\"con\":" + fmt6(r.con) +
         ",\"bce\":" + fmt6(r.bce);
  }
  s += ",\"total\":" + fmt6(r.total) + ",\"lr\":" + fmt6(lr) + "}";
  return s;
}

template <class T>
BasicVar<T> recon_loss(const BasicVar<T>& x, const BasicVar<T>& x_rec) {
  if (x.shape() != x_rec.shape()) {
    throw DimensionError("recon_loss: input " + ad::shape_str(x.shape()) +
                         " vs reconstruction " + ad::shape_str(x_rec.shape()));
  }
  return ad::mean(ad::square(x - x_rec));
}

template <class T>
BasicVar<T> kl_loss(const BasicVar<T>& mu, const BasicVar<T>& logvar) {
  if (mu.shape() != logvar.shape() || mu.shape().size() != 2) {
    throw DimensionError("kl_loss: mu " + ad::shape_str(mu.shape()) +
                         " and logvar " + ad::shape_str(logvar.shape()) +
                         " must be equal [N, d]");
  }
  // mu^2 + e^lv - 1 - lv
  auto inner = ad::add_scalar(ad::square(mu) + ad::exp(logvar) - logvar, -1.0);
  auto per_item = ad::sum(inner, std::vector<std::size_t>{1});
  return ad::scale(ad::mean(per_item), 0.5);
}

template <class T>
BasicVar<T> cosface_loss(const BasicVar<T>& f, std::span<const int> labels,
                         const BasicVar<T>& class_weights, double scale,
                         double margin) {
  if (f.shape().size() != 2 || class_weights.shape().size() != 2 ||
      class_weights.shape()[0] != 2 ||
      class_weights.shape()[1] != f.shape()[1]) {
    throw DimensionError("cosface_loss: features " + ad::shape_str(f.shape()) +
                         " vs class weights " +
                         ad::shape_str(class_weights.shape()));
  }
  const std::size_t n = f.shape()[0];
  check_labels(labels, n, "cosface_loss");
  auto& tape = *f.tape();
  auto cos = ad::matmul(ad::normalize_rows(f),
                        ad::transpose(ad::normalize_rows(class_weights)));
  BasicTensor<T> shift({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    shift[i * 2 + static_cast<std::size_t>(labels[i])] = static_cast<T>(-margin);
  }
  auto logits = ad::scale(cos + tape.constant(std::move(shift)), scale);
  return ad::cross_entropy(logits, labels);
}

template <class T>
BasicVar<T> concentration_loss(const BasicVar<T>& maps,
                               std::span<const int> labels) {
  const Shape& s = maps.shape();
  if (s.size() < 2) {
    throw DimensionError("concentration_loss: maps need a batch axis, got " +
                         ad::shape_str(s));
  }
  check_labels(labels, s[0], "concentration_loss");
  auto& tape = *maps.tape();
  std::size_t bona = 0;
  for (int l : labels) bona += l == 0 ? 1 : 0;
  if (bona == 0) return tape.constant(BasicTensor<T>::scalar(T(0)));
  std::vector<std::size_t> axes;
  for (std::size_t a = 1; a < s.size(); ++a) axes.push_back(a);
  auto per_item = ad::mean(ad::abs(maps), axes);
  BasicTensor<T> mask({s[0]});
  for (std::size_t i = 0; i < s[0]; ++i) {
    mask[i] = labels[i] == 0 ? static_cast<T>(1.0 / double(bona)) : T(0);
  }
  return ad::sum(per_item * tape.constant(std::move(mask)));
}

template <class T>
BasicVar<T> bce_loss(const BasicVar<T>& probs, std::span<const int> labels) {
  const std::size_t n = probs.shape().empty() ? 1 : probs.shape()[0];
  if (probs.value().numel() != n) {
    throw DimensionError("bce_loss: expected one probability per item, got " +
                         ad::shape_str(probs.shape()));
  }
  check_labels(labels, n, "bce_loss");
  auto& tape = *probs.tape();
  auto p = ad::clamp(ad::reshape(probs, Shape{n}), kProbabilityFloor,
                     1.0 - kProbabilityFloor);
  BasicTensor<T> y({n}), not_y({n});
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<T>(labels[i]);
    not_y[i] = static_cast<T>(1 - labels[i]);
  }
  auto ll = tape.constant(std::move(y)) * ad::log(p) +
            tape.constant(std::move(not_y)) *
                ad::log(ad::add_scalar(ad::negate(p), 1.0));
  return ad::negate(ad::mean(ll));
}

namespace {

// Adds w * term to the running total, skipping zero weights.
void accumulate(ad::Var& total, bool& has_total, const ad::Var& term,
                double w) {
  if (w == 0.0) return;
  auto weighted = w == 1.0 ? term : ad::scale(term, w);
  total = has_total ? total + weighted : weighted;
  has_total = true;
}

double weighted_total(const LossReport& r, const LossWeights& w) {
  return w.w_recon * r.recon + w.w_kl * r.kl + w.w_cos * r.cos +
         w.w_con * r.con + w.w_bce * r.bce;
}

}  // namespace

StageLoss stage1_loss(const ad::Var& x, const ad::Var& x_rec, const ad::Var& mu,
                      const ad::Var& logvar, const LossWeights& w) {
  w.validate();
  auto recon = recon_loss(x, x_rec);
  auto kl = kl_loss(mu, logvar);
  StageLoss out;
  bool has = false;
  accumulate(out.total, has, recon, w.w_recon);
  accumulate(out.total, has, kl, w.w_kl);
  if (!has) out.total = x.tape()->constant(ad::Tensor::scalar(0.0f));
  out.report.recon = recon.value().item();
  out.report.kl = kl.value().item();
  out.report.total = weighted_total(out.report, w);
  return out;
}

StageLoss stage2_loss(const Stage2Inputs& in, const ad::Var& class_weights,
                      const CosFaceHead& head, const LossWeights& w) {
  w.validate();
  head.validate();
  auto recon = recon_loss(in.x, in.x_rec);
  auto cos = cosface_loss(in.f_d, in.labels, class_weights, head.scale,
                          head.margin);
  auto con = concentration_loss(in.maps, in.labels);
  auto kl = kl_loss(in.mu_d, in.logvar_d);
  auto bce = bce_loss(in.probs, in.labels);
  StageLoss out;
  bool has = false;
  accumulate(out.total, has, recon, w.w_recon);
  accumulate(out.total, has, cos, w.w_cos);
  accumulate(out.total, has, con, w.w_con);
  accumulate(out.total, has, kl, w.w_kl);
  accumulate(out.total, has, bce, w.w_bce);
  if (!has) out.total = in.x.tape()->constant(ad::Tensor::scalar(0.0f));
  out.report.recon = recon.value().item();
  out.report.cos = cos.value().item();
  out.report.con = con.value().item();
  out.report.kl = kl.value().item();
  out.report.bce = bce.value().item();
  out.report.total = weighted_total(out.report, w);
  return out;
}

#define DSVAE_INSTANTIATE_LOSSES(T)                                          \
  template BasicVar<T> recon_loss(const BasicVar<T>&, const BasicVar<T>&);   \
  template BasicVar<T> kl_loss(const BasicVar<T>&, const BasicVar<T>&);      \
  template BasicVar<T> cosface_loss(const BasicVar<T>&, std::span<const int>, \
                                    const BasicVar<T>&, double, double);     \
  template BasicVar<T> concentration_loss(const BasicVar<T>&,                \
                                          std::span<const int>);             \
  template BasicVar<T> bce_loss(const BasicVar<T>&, std::span<const int>);

DSVAE_INSTANTIATE_LOSSES(float)
DSVAE_INSTANTIATE_LOSSES(double)

#undef DSVAE_INSTANTIATE_LOSSES

}  // namespace dsvae::loss
