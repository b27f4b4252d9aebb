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
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dsvae/losses.hpp"
#include "dsvae/ops.hpp"
#include "dsvae/rng.hpp"

namespace dsvae::nn {

using ad::Parameter;
using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Network sizes shared by every sub-network of a bundle.
struct Architecture {
  std::size_t n_mels = 80;
  std::size_t target_frames = 96;
  std::size_t latent_dim = 32;
  std::vector<std::size_t> encoder_channels{16, 32, 64, 128};
  std::size_t encoder_kernel = 3;
  std::size_t decoder_kernel = 4;
  std::vector<std::size_t> classifier_channels{16, 32};
  double leaky_slope = 0.2;

  /// Spatial extent (height, width) after the encoder's conv stack.
  std::pair<std::size_t, std::size_t> bottleneck() const;
  /// Throws ContractError when the decoders cannot reproduce the input
  /// extent.
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum class LayerKind { kConv, kConvTranspose, kLinear };
enum class Activation { kNone, kLeakyRelu, kSigmoid };

struct LayerDescriptor {
  LayerKind kind;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Activation activation = Activation::kNone;

  friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

struct Layer {
  LayerDescriptor desc;
  Parameter weight;
  Parameter bias;
};

enum class Subnet {
  kGeneralEncoder,       // E_G
  kDisentangledEncoder,  // E_D
  kGeneralDecoder,       // D
  kJointDecoder,         // D_rec
  kActivationDecoder,    // D_map
  kClassifier,           // C
  kCosFace,
};

/// Short tag used as parameter-name prefix and in checkpoint headers.
std::string subnet_tag(Subnet s);

using ParameterVisitor = std::function<void(Parameter&)>;

/// Conv stack with two linear heads producing (mu, logvar).
class Encoder {
 public:
  Encoder(const Architecture& arch, const std::string& prefix,
          std::uint64_t seed);

  std::pair<Var, Var> forward(const Var& x, bool frozen);
  std::vector<LayerDescriptor> layers() const;
  void for_each_parameter(const ParameterVisitor& fn);

 private:
  std::vector<Layer> trunk_;
  Layer mu_;
  Layer logvar_;
  double slope_;
};

/// Linear projection to the bottleneck followed by transposed convs back to
/// the input extent. The final layer is linear or sigmoid.
class Decoder {
 public:
  Decoder(const Architecture& arch, std::size_t input_dim,
          Activation final_activation, const std::string& prefix,
          std::uint64_t seed);

  Var forward(const Var& z, bool frozen);
  std::vector<LayerDescriptor> layers() const;
  void for_each_parameter(const ParameterVisitor& fn);
  /// The final transposed conv (tests zero it to probe the output head).
  Layer& output_layer() { return stack_.back(); }

 private:
  Layer project_;
  std::vector<Layer> stack_;
  std::size_t channels_, height_, width_;
  double slope_;
};

/// Two strided convs, global mean pool, linear, sigmoid.
class Classifier {
 public:
  Classifier(const Architecture& arch, const std::string& prefix,
             std::uint64_t seed);

  /// Probabilities, shape [N].
  Var forward(const Var& x, bool frozen);
  std::vector<LayerDescriptor> layers() const;
  void for_each_parameter(const ParameterVisitor& fn);
  Layer& output_layer() { return head_; }

 private:
  std::vector<Layer> trunk_;
  Layer head_;
  double slope_;
};

enum class LatentSource { kGeneral, kDisentangled };

/// q(z|x) for a batch: mu and logvar are [N, latent_dim].
struct LatentDistribution {
  Var mu;
  Var logvar;
  LatentSource source;
};

struct LatentSample {
  Var z;  // [N, latent_dim]
  LatentSource source;
};

/// [F_G | F_D], [N, 2 * latent_dim].
struct JointFeature {
  Var f;
  std::size_t latent_dim;
};

struct ActivationMap {
  Var values;  // [N, 1, n_mels, frames], entries in [0, 1]
};

/// All sub-networks plus which of them are frozen. Stage-1 bundles hold
/// E_G and D; stage-2 bundles hold E_G (frozen), E_D, D_rec, D_map, C and
/// the CosFace class vectors.
struct ModelBundle {
  Architecture arch;
  std::optional<Encoder> general_encoder;
  std::optional<Encoder> disentangled_encoder;
  std::optional<Decoder> general_decoder;
  std::optional<Decoder> joint_decoder;
  std::optional<Decoder> activation_decoder;
  std::optional<Classifier> classifier;
  std::optional<loss::CosFaceHead> cosface;
  std::set<Subnet> frozen;

  static ModelBundle stage1(const Architecture& arch, std::uint64_t seed);
  /// Fresh stage-2 networks around a copy of `general`'s E_G, which is
  /// frozen.
  static ModelBundle stage2(const ModelBundle& general, std::uint64_t seed,
                            double cosface_scale = 30.0,
                            double cosface_margin = 0.35);

  std::vector<Subnet> present() const;
  bool has(Subnet s) const;
  bool is_frozen(Subnet s) const { return frozen.count(s) != 0; }
  /// Every parameter in a fixed order: by sub-network, then layer.
  std::vector<Parameter*> parameters();
  std::vector<Parameter*> parameters(Subnet s);
  /// Parameters of present, non-frozen sub-networks.
  std::vector<Parameter*> trainable_parameters();
  void zero_grad();
};

/// Runs E_G or E_D. X is [N, 1, n_mels, target_frames].
LatentDistribution encode(ModelBundle& bundle, LatentSource which,
                          const Var& x);

/// z = mu + exp(0.5 logvar) * eps with eps ~ N(0, I) from `rng`.
LatentSample reparameterize(const LatentDistribution& dist, Rng& rng);
/// Same with caller-provided noise of shape [N, latent_dim].
LatentSample reparameterize(const LatentDistribution& dist, Tensor eps);

/// Mean latent, no sampling.
LatentSample mean_sample(const LatentDistribution& dist);

/// X~ = D(F_G).
Var decode_general(ModelBundle& bundle, const LatentSample& f_g);

JointFeature concat_features(const LatentSample& f_g, const LatentSample& f_d);

/// X^ = D_rec([F_G | F_D]).
Var decode_joint(ModelBundle& bundle, const JointFeature& f);

/// A_map = D_map(F_D), sigmoid output.
ActivationMap decode_activation(ModelBundle& bundle, const LatentSample& f_d);

/// X_map = A_map (elementwise) X.
Var apply_activation(const ActivationMap& a, const Var& x);

/// Probability of each item being synthetic, shape [N].
Var classify(ModelBundle& bundle, const Var& x_map);

struct InferenceResult {
  std::vector<float> scores;  // one per item
  Tensor activation;          // [N, 1, n_mels, frames]
  Tensor activated;           // X_map, same shape
};

/// E_D mean latent -> D_map -> X_map -> C. E_G is not evaluated.
InferenceResult infer(ModelBundle& bundle, const Tensor& x);

/// Mean latents of E_G or E_D, [N, latent_dim].
Tensor mean_latents(ModelBundle& bundle, LatentSource which, const Tensor& x);

/// D_rec([mu_G | mu_D]) with mean latents.
Tensor reconstruct_joint(ModelBundle& bundle, const Tensor& x);

/// Stacks [n_mels, frames] matrices into a [N, 1, n_mels, frames] batch.
Tensor make_batch(const std::vector<const Tensor*>& items);

}  // namespace dsvae::nn
