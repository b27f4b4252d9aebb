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

#include "dsvae/model.hpp"

#include <cmath>

namespace dsvae::nn {
namespace {

constexpr std::size_t kEncoderStride = 2;
constexpr std::size_t kDecoderStride = 2;

std::size_t encoder_padding(const Architecture& a) { return a.encoder_kernel / 2; }
std::size_t decoder_padding(const Architecture& a) {
  return (a.decoder_kernel - kDecoderStride) / 2;
}

void kaiming_uniform(Tensor& w, double fan_in, double slope, Rng& rng) {
  const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * fan_in));
  for (float& v : w.data()) v = static_cast<float>(rng.uniform(-bound, bound));
}

Layer make_layer(const LayerDescriptor& d, const std::string& name,
                 double slope, Rng& rng) {
  Layer l;
  l.desc = d;
  double fan_in = 0.0;
  switch (d.kind) {
    case LayerKind::kConv:
      l.weight.value = Tensor({d.out, d.in, d.kernel, d.kernel});
      fan_in = double(d.in * d.kernel * d.kernel);
      break;
    case LayerKind::kConvTranspose:
      l.weight.value = Tensor({d.in, d.out, d.kernel, d.kernel});
      fan_in = double(d.in * d.kernel * d.kernel) / double(d.stride * d.stride);
      break;
    case LayerKind::kLinear:
      l.weight.value = Tensor({d.out, d.in});
      fan_in = double(d.in);
      break;
  }
  kaiming_uniform(l.weight.value, fan_in, slope, rng);
  l.weight.name = name + ".weight";
  l.bias.value = Tensor({d.out});
  l.bias.name = name + ".bias";
  return l;
}

Var apply_layer(Layer& l, const Var& x, bool frozen, double slope) {
  Tape& tape = *x.tape();
  Var w = tape.parameter(l.weight, frozen);
  Var b = tape.parameter(l.bias, frozen);
  Var y;
  switch (l.desc.kind) {
    case LayerKind::kConv:
      y = ad::add_bias(ad::conv2d(x, w, l.desc.stride, l.desc.padding), b);
      break;
    case LayerKind::kConvTranspose:
      y = ad::add_bias(ad::conv2d_transpose(x, w, l.desc.stride, l.desc.padding), b);
      break;
    case LayerKind::kLinear:
      y = ad::linear(x, w, b);
      break;
  }
  switch (l.desc.activation) {
    case Activation::kNone: return y;
    case Activation::kLeakyRelu: return ad::leaky_relu(y, slope);
    case Activation::kSigmoid: return ad::sigmoid(y);
  }
  return y;
}

void check_input(const Architecture& a, const Var& x) {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != 1 || s[2] != a.n_mels || s[3] != a.target_frames) {
    throw DimensionError("expected input [N, 1, " + std::to_string(a.n_mels) +
                         ", " + std::to_string(a.target_frames) + "], got " +
                         ad::shape_str(s));
  }
}

void check_latent(const Var& z, std::size_t dim, const char* what) {
  const auto& s = z.shape();
  if (s.size() != 2 || s[1] != dim) {
    throw DimensionError(std::string(what) + ": expected [N, " +
                         std::to_string(dim) + "], got " + ad::shape_str(s));
  }
}

template <class Net>
Net& require(std::optional<Net>& net, Subnet s) {
  if (!net) {
    throw ContractError("bundle has no " + subnet_tag(s) + " network");
  }
  return *net;
}

}  // namespace

std::string subnet_tag(Subnet s) {
  switch (s) {
    case Subnet::kGeneralEncoder: return "E_G";
    case Subnet::kDisentangledEncoder: return "E_D";
    case Subnet::kGeneralDecoder: return "D";
    case Subnet::kJointDecoder: return "D_rec";
    case Subnet::kActivationDecoder: return "D_map";
    case Subnet::kClassifier: return "C";
    case Subnet::kCosFace: return "cosface";
  }
  return "?";
}

std::pair<std::size_t, std::size_t> Architecture::bottleneck() const {
  std::size_t h = n_mels, w = target_frames;
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
    h = ad::conv_output_extent(h, encoder_kernel, kEncoderStride,
                               encoder_kernel / 2);
    w = ad::conv_output_extent(w, encoder_kernel, kEncoderStride,
                               encoder_kernel / 2);
  }
  return {h, w};
}

void Architecture::validate() const {
  if (latent_dim == 0 || encoder_channels.empty() ||
      classifier_channels.empty() || encoder_kernel == 0 ||
      decoder_kernel < kDecoderStride ||
      (decoder_kernel - kDecoderStride) % 2 != 0) {
    throw ContractError("architecture: invalid sizes");
  }
  auto [h, w] = bottleneck();
  const std::size_t pad = decoder_padding(*this);
  for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
    h = ad::conv_transpose_output_extent(h, decoder_kernel, kDecoderStride, pad);
    w = ad::conv_transpose_output_extent(w, decoder_kernel, kDecoderStride, pad);
  }
  if (h != n_mels || w != target_frames) {
    throw ContractError("architecture: decoders produce " + std::to_string(h) +
                        "x" + std::to_string(w) + " instead of " +
                        std::to_string(n_mels) + "x" +
                        std::to_string(target_frames) +
                        "; input extents must be divisible by 2^depth");
  }
}

Encoder::Encoder(const Architecture& arch, const std::string& prefix,
                 std::uint64_t seed)
    : slope_(arch.leaky_slope) {
  arch.validate();
  Rng rng(seed);
  std::size_t in = 1;
  for (std::size_t i = 0; i < arch.encoder_channels.size(); ++i) {
    const LayerDescriptor d{LayerKind::kConv, in, arch.encoder_channels[i],
                            arch.encoder_kernel, kEncoderStride,
                            encoder_padding(arch), Activation::kLeakyRelu};
    trunk_.push_back(make_layer(d, prefix + ".conv" + std::to_string(i), slope_, rng));
    in = arch.encoder_channels[i];
  }
  const auto [h, w] = arch.bottleneck();
  const std::size_t flat = in * h * w;
  const LayerDescriptor head{LayerKind::kLinear, flat, arch.latent_dim, 0, 1, 0,
                             Activation::kNone};
  mu_ = make_layer(head, prefix + ".mu", slope_, rng);
  logvar_ = make_layer(head, prefix + ".logvar", slope_, rng);
}

std::pair<Var, Var> Encoder::forward(const Var& x, bool frozen) {
  Var h = x;
  for (Layer& l : trunk_) h = apply_layer(l, h, frozen, slope_);
  const std::size_t n = h.shape()[0];
  h = ad::reshape(h, {n, h.value().numel() / n});
  return {apply_layer(mu_, h, frozen, slope_),
          apply_layer(logvar_, h, frozen, slope_)};
}

std::vector<LayerDescriptor> Encoder::layers() const {
  std::vector<LayerDescriptor> out;
  for (const Layer& l : trunk_) out.push_back(l.desc);
  out.push_back(mu_.desc);
  out.push_back(logvar_.desc);
  return out;
}

void Encoder::for_each_parameter(const ParameterVisitor& fn) {
  for (Layer& l : trunk_) {
    fn(l.weight);
    fn(l.bias);
  }
  for (Layer* l : {&mu_, &logvar_}) {
    fn(l->weight);
    fn(l->bias);
  }
}

Decoder::Decoder(const Architecture& arch, std::size_t input_dim,
                 Activation final_activation, const std::string& prefix,
                 std::uint64_t seed)
    : slope_(arch.leaky_slope) {
  arch.validate();
  Rng rng(seed);
  const auto [h, w] = arch.bottleneck();
  channels_ = arch.encoder_channels.back();
  height_ = h;
  width_ = w;
  project_ = make_layer({LayerKind::kLinear, input_dim, channels_ * h * w, 0, 1,
                         0, Activation::kLeakyRelu},
                        prefix + ".project", slope_, rng);
  // Mirror of the encoder channels, ending in a single output plane.
  std::vector<std::size_t> outs(arch.encoder_channels.rbegin() + 1,
                                arch.encoder_channels.rend());
  outs.push_back(1);
  std::size_t in = channels_;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const bool last = i + 1 == outs.size();
    const LayerDescriptor d{LayerKind::kConvTranspose, in, outs[i],
                            arch.decoder_kernel, kDecoderStride,
                            decoder_padding(arch),
                            last ? final_activation : Activation::kLeakyRelu};
    stack_.push_back(make_layer(d, prefix + ".deconv" + std::to_string(i), slope_, rng));
    in = outs[i];
  }
}

Var Decoder::forward(const Var& z, bool frozen) {
  Var h = apply_layer(project_, z, frozen, slope_);
  h = ad::reshape(h, {z.shape()[0], channels_, height_, width_});
  for (Layer& l : stack_) h = apply_layer(l, h, frozen, slope_);
  return h;
}

std::vector<LayerDescriptor> Decoder::layers() const {
  std::vector<LayerDescriptor> out{project_.desc};
  for (const Layer& l : stack_) out.push_back(l.desc);
  return out;
}

void Decoder::for_each_parameter(const ParameterVisitor& fn) {
  fn(project_.weight);
  fn(project_.bias);
  for (Layer& l : stack_) {
    fn(l.weight);
    fn(l.bias);
  }
}

Classifier::Classifier(const Architecture& arch, const std::string& prefix,
                       std::uint64_t seed)
    : slope_(arch.leaky_slope) {
  arch.validate();
  Rng rng(seed);
  std::size_t in = 1;
  for (std::size_t i = 0; i < arch.classifier_channels.size(); ++i) {
    const LayerDescriptor d{LayerKind::kConv, in, arch.classifier_channels[i],
                            arch.encoder_kernel, kEncoderStride,
                            encoder_padding(arch), Activation::kLeakyRelu};
    trunk_.push_back(make_layer(d, prefix + ".conv" + std::to_string(i), slope_, rng));
    in = arch.classifier_channels[i];
  }
  head_ = make_layer({LayerKind::kLinear, in, 1, 0, 1, 0, Activation::kSigmoid},
                     prefix + ".head", slope_, rng);
}

Var Classifier::forward(const Var& x, bool frozen) {
  Var h = x;
  for (Layer& l : trunk_) h = apply_layer(l, h, frozen, slope_);
  h = ad::mean(h, std::vector<std::size_t>{2, 3});
  Var p = apply_layer(head_, h, frozen, slope_);
  return ad::reshape(p, {x.shape()[0]});
}

std::vector<LayerDescriptor> Classifier::layers() const {
  std::vector<LayerDescriptor> out;
  for (const Layer& l : trunk_) out.push_back(l.desc);
  out.push_back(head_.desc);
  return out;
}

void Classifier::for_each_parameter(const ParameterVisitor& fn) {
  for (Layer& l : trunk_) {
    fn(l.weight);
    fn(l.bias);
  }
  fn(head_.weight);
  fn(head_.bias);
}

ModelBundle ModelBundle::stage1(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  ModelBundle b;
  b.arch = arch;
  b.general_encoder.emplace(arch, "E_G", derive_seed(seed, 1));
  b.general_decoder.emplace(arch, arch.latent_dim, Activation::kNone, "D",
                            derive_seed(seed, 3));
  return b;
}

ModelBundle ModelBundle::stage2(const ModelBundle& general, std::uint64_t seed,
                                double cosface_scale, double cosface_margin) {
  if (!general.general_encoder) {
    throw ContractError("stage-2 bundle needs a trained E_G");
  }
  const Architecture& arch = general.arch;
  ModelBundle b;
  b.arch = arch;
  b.general_encoder = general.general_encoder;
  b.frozen.insert(Subnet::kGeneralEncoder);
  b.disentangled_encoder.emplace(arch, "E_D", derive_seed(seed, 2));
  b.joint_decoder.emplace(arch, 2 * arch.latent_dim, Activation::kNone, "D_rec",
                          derive_seed(seed, 4));
  b.activation_decoder.emplace(arch, arch.latent_dim, Activation::kSigmoid,
                               "D_map", derive_seed(seed, 5));
  b.classifier.emplace(arch, "C", derive_seed(seed, 6));
  loss::CosFaceHead head;
  head.weights.name = "cosface.weight";
  head.weights.value = Tensor({2, arch.latent_dim});
  Rng rng(derive_seed(seed, 7));
  for (float& v : head.weights.value.data()) v = static_cast<float>(rng.normal());
  head.scale = cosface_scale;
  head.margin = cosface_margin;
  head.validate();
  b.cosface = std::move(head);
  return b;
}

std::vector<Subnet> ModelBundle::present() const {
  std::vector<Subnet> out;
  if (general_encoder) out.push_back(Subnet::kGeneralEncoder);
  if (disentangled_encoder) out.push_back(Subnet::kDisentangledEncoder);
  if (general_decoder) out.push_back(Subnet::kGeneralDecoder);
  if (joint_decoder) out.push_back(Subnet::kJointDecoder);
  if (activation_decoder) out.push_back(Subnet::kActivationDecoder);
  if (classifier) out.push_back(Subnet::kClassifier);
  if (cosface) out.push_back(Subnet::kCosFace);
  return out;
}

bool ModelBundle::has(Subnet s) const {
  for (Subnet p : present()) {
    if (p == s) return true;
  }
  return false;
}

std::vector<Parameter*> ModelBundle::parameters(Subnet s) {
  std::vector<Parameter*> out;
  auto collect = [&out](Parameter& p) { out.push_back(&p); };
  switch (s) {
    case Subnet::kGeneralEncoder:
      if (general_encoder) general_encoder->for_each_parameter(collect);
      break;
    case Subnet::kDisentangledEncoder:
      if (disentangled_encoder) disentangled_encoder->for_each_parameter(collect);
      break;
    case Subnet::kGeneralDecoder:
      if (general_decoder) general_decoder->for_each_parameter(collect);
      break;
    case Subnet::kJointDecoder:
      if (joint_decoder) joint_decoder->for_each_parameter(collect);
      break;
    case Subnet::kActivationDecoder:
      if (activation_decoder) activation_decoder->for_each_parameter(collect);
      break;
    case Subnet::kClassifier:
      if (classifier) classifier->for_each_parameter(collect);
      break;
    case Subnet::kCosFace:
      if (cosface) out.push_back(&cosface->weights);
      break;
  }
  return out;
}

std::vector<Parameter*> ModelBundle::parameters() {
  std::vector<Parameter*> out;
  for (Subnet s : present()) {
    auto ps = parameters(s);
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

std::vector<Parameter*> ModelBundle::trainable_parameters() {
  std::vector<Parameter*> out;
  for (Subnet s : present()) {
    if (is_frozen(s)) continue;
    auto ps = parameters(s);
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

void ModelBundle::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

LatentDistribution encode(ModelBundle& bundle, LatentSource which,
                          const Var& x) {
  check_input(bundle.arch, x);
  const bool general = which == LatentSource::kGeneral;
  const Subnet s = general ? Subnet::kGeneralEncoder : Subnet::kDisentangledEncoder;
  Encoder& enc = general ? require(bundle.general_encoder, s)
                         : require(bundle.disentangled_encoder, s);
  auto [mu, logvar] = enc.forward(x, bundle.is_frozen(s));
  return {mu, logvar, which};
}

LatentSample reparameterize(const LatentDistribution& dist, Tensor eps) {
  if (eps.shape() != dist.mu.shape()) {
    throw DimensionError("reparameterize: noise " + ad::shape_str(eps.shape()) +
                         " vs mu " + ad::shape_str(dist.mu.shape()));
  }
  Tape& tape = *dist.mu.tape();
  Var sigma = ad::exp(ad::scale(dist.logvar, 0.5));
  return {dist.mu + sigma * tape.constant(std::move(eps)), dist.source};
}

LatentSample reparameterize(const LatentDistribution& dist, Rng& rng) {
  Tensor eps(dist.mu.shape());
  for (float& v : eps.data()) v = static_cast<float>(rng.normal());
  return reparameterize(dist, std::move(eps));
}

LatentSample mean_sample(const LatentDistribution& dist) {
  return {dist.mu, dist.source};
}

Var decode_general(ModelBundle& bundle, const LatentSample& f_g) {
  if (f_g.source != LatentSource::kGeneral) {
    throw ContractError("decode_general needs a general (F_G) sample");
  }
  check_latent(f_g.z, bundle.arch.latent_dim, "decode_general");
  Decoder& d = require(bundle.general_decoder, Subnet::kGeneralDecoder);
  return d.forward(f_g.z, bundle.is_frozen(Subnet::kGeneralDecoder));
}

JointFeature concat_features(const LatentSample& f_g, const LatentSample& f_d) {
  if (f_g.source != LatentSource::kGeneral ||
      f_d.source != LatentSource::kDisentangled) {
    throw ContractError("concat_features expects (F_G, F_D) in that order");
  }
  if (f_g.z.shape() != f_d.z.shape() || f_g.z.shape().size() != 2) {
    throw ContractError("concat_features: F_G " + ad::shape_str(f_g.z.shape()) +
                        " and F_D " + ad::shape_str(f_d.z.shape()) +
                        " must have equal [N, d] shapes");
  }
  return {ad::concat(f_g.z, f_d.z, 1), f_g.z.shape()[1]};
}

Var decode_joint(ModelBundle& bundle, const JointFeature& f) {
  check_latent(f.f, 2 * bundle.arch.latent_dim, "decode_joint");
  Decoder& d = require(bundle.joint_decoder, Subnet::kJointDecoder);
  return d.forward(f.f, bundle.is_frozen(Subnet::kJointDecoder));
}

ActivationMap decode_activation(ModelBundle& bundle, const LatentSample& f_d) {
  if (f_d.source != LatentSource::kDisentangled) {
    throw ContractError("decode_activation needs a disentangled (F_D) sample");
  }
  check_latent(f_d.z, bundle.arch.latent_dim, "decode_activation");
  Decoder& d = require(bundle.activation_decoder, Subnet::kActivationDecoder);
  return {d.forward(f_d.z, bundle.is_frozen(Subnet::kActivationDecoder))};
}

Var apply_activation(const ActivationMap& a, const Var& x) {
  if (a.values.shape() != x.shape()) {
    throw DimensionError("apply_activation: map " +
                         ad::shape_str(a.values.shape()) + " vs input " +
                         ad::shape_str(x.shape()));
  }
  return a.values * x;
}

Var classify(ModelBundle& bundle, const Var& x_map) {
  check_input(bundle.arch, x_map);
  Classifier& c = require(bundle.classifier, Subnet::kClassifier);
  return c.forward(x_map, bundle.is_frozen(Subnet::kClassifier));
}

InferenceResult infer(ModelBundle& bundle, const Tensor& x) {
  Tape tape(false);
  Var xv = tape.constant(x);
  auto dist = encode(bundle, LatentSource::kDisentangled, xv);
  auto map = decode_activation(bundle, mean_sample(dist));
  Var x_map = apply_activation(map, xv);
  Var p = classify(bundle, x_map);
  InferenceResult r;
  r.scores.assign(p.value().data().begin(), p.value().data().end());
  r.activation = map.values.value();
  r.activated = x_map.value();
  return r;
}

Tensor mean_latents(ModelBundle& bundle, LatentSource which, const Tensor& x) {
  Tape tape(false);
  return encode(bundle, which, tape.constant(x)).mu.value();
}

Tensor reconstruct_joint(ModelBundle& bundle, const Tensor& x) {
  Tape tape(false);
  Var xv = tape.constant(x);
  auto g = encode(bundle, LatentSource::kGeneral, xv);
  auto d = encode(bundle, LatentSource::kDisentangled, xv);
  return decode_joint(bundle, concat_features(mean_sample(g), mean_sample(d)))
      .value();
}

Tensor make_batch(const std::vector<const Tensor*>& items) {
  if (items.empty()) throw ContractError("make_batch: no items");
  const auto& s = items.front()->shape();
  if (s.size() != 2) {
    throw DimensionError("make_batch: items must be [n_mels, frames], got " +
                         ad::shape_str(s));
  }
  Tensor out({items.size(), 1, s[0], s[1]});
  const std::size_t per = s[0] * s[1];
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i]->shape() != s) {
      throw DimensionError("make_batch: mixed item shapes " + ad::shape_str(s) +
                           " and " + ad::shape_str(items[i]->shape()));
    }
    std::copy_n(items[i]->raw(), per, out.raw() + i * per);
  }
  return out;
}

}  // namespace dsvae::nn
