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

#include "dsvae/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <system_error>

#include "dsvae/data_io.hpp"
#include "dsvae/error.hpp"
#include "json.hpp"

namespace dsvae::ckpt {
namespace {

using nlohmann::json;
constexpr std::size_t kPreamble = 12;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double to_number(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return std::uint32_t(b[off]) | (std::uint32_t(b[off + 1]) << 8) |
         (std::uint32_t(b[off + 2]) << 16) | (std::uint32_t(b[off + 3]) << 24);
}

void put_floats(std::vector<std::uint8_t>& out, const ad::Tensor& t) {
  for (float f : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

json arch_json(const nn::Architecture& a) {
  return {{"n_mels", a.n_mels},
          {"target_frames", a.target_frames},
          {"latent_dim", a.latent_dim},
          {"encoder_channels", a.encoder_channels},
          {"encoder_kernel", a.encoder_kernel},
          {"decoder_kernel", a.decoder_kernel},
          {"classifier_channels", a.classifier_channels},
          {"leaky_slope", a.leaky_slope}};
}

nn::Architecture arch_from(const json& j) {
  nn::Architecture a;
  a.n_mels = j.at("n_mels").get<std::size_t>();
  a.target_frames = j.at("target_frames").get<std::size_t>();
  a.latent_dim = j.at("latent_dim").get<std::size_t>();
  a.encoder_channels = j.at("encoder_channels").get<std::vector<std::size_t>>();
  a.encoder_kernel = j.at("encoder_kernel").get<std::size_t>();
  a.decoder_kernel = j.at("decoder_kernel").get<std::size_t>();
  a.classifier_channels = j.at("classifier_channels").get<std::vector<std::size_t>>();
  a.leaky_slope = j.at("leaky_slope").get<double>();
  return a;
}

json frontend_json(const dsp::FrontendConfig& f) {
  return {{"sample_rate", f.sample_rate},
          {"window_ms", f.stft.window_ms},
          {"hop_ms", f.stft.hop_ms},
          {"fft_size", f.stft.fft_size},
          {"n_mels", f.n_mels},
          {"f_min", f.f_min},
          {"f_max", f.f_max},
          {"log_epsilon", f.norm.log_epsilon},
          {"standardize", f.norm.standardize},
          {"target_frames", f.norm.target_frames}};
}

dsp::FrontendConfig frontend_from(const json& j) {
  dsp::FrontendConfig f;
  f.sample_rate = j.at("sample_rate").get<double>();
  f.stft.window_ms = j.at("window_ms").get<double>();
  f.stft.hop_ms = j.at("hop_ms").get<double>();
  f.stft.fft_size = j.at("fft_size").get<std::size_t>();
  f.n_mels = j.at("n_mels").get<std::size_t>();
  f.f_min = j.at("f_min").get<double>();
  f.f_max = j.at("f_max").get<double>();
  f.norm.log_epsilon = j.at("log_epsilon").get<double>();
  f.norm.standardize = j.at("standardize").get<bool>();
  f.norm.target_frames = j.at("target_frames").get<std::size_t>();
  return f;
}

nn::Subnet subnet_from_tag(const std::string& tag) {
  using nn::Subnet;
  for (Subnet s : {Subnet::kGeneralEncoder, Subnet::kDisentangledEncoder,
                   Subnet::kGeneralDecoder, Subnet::kJointDecoder,
                   Subnet::kActivationDecoder, Subnet::kClassifier,
                   Subnet::kCosFace}) {
    if (nn::subnet_tag(s) == tag) return s;
  }
  throw std::invalid_argument("unknown sub-network '" + tag + "'");
}

std::vector<std::string> tags(const std::vector<nn::Subnet>& v) {
  std::vector<std::string> out;
  for (auto s : v) out.push_back(nn::subnet_tag(s));
  return out;
}

// Rebuilds a bundle with the same sub-networks; values are overwritten by
// the caller.
nn::ModelBundle skeleton(const nn::Architecture& arch,
                         const std::vector<std::string>& subnets,
                         const json& cosface) {
  nn::ModelBundle general = nn::ModelBundle::stage1(arch, 0);
  const bool stage2 = std::find(subnets.begin(), subnets.end(),
                                nn::subnet_tag(nn::Subnet::kDisentangledEncoder)) !=
                      subnets.end();
  if (!stage2) return general;
  return nn::ModelBundle::stage2(general, 0, cosface.at("scale").get<double>(),
                                 cosface.at("margin").get<double>());
}

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  // parameters() only hands out pointers; nothing is modified.
  auto& bundle = const_cast<nn::ModelBundle&>(c.bundle);
  const auto params = bundle.parameters();

  json h;
  h["arch"] = arch_json(bundle.arch);
  h["latent_dim"] = bundle.arch.latent_dim;
  h["frontend"] = frontend_json(c.frontend);
  h["stage"] = c.stage;
  h["iteration"] = c.iteration;
  h["epoch"] = c.epoch;
  h["subnets"] = tags(bundle.present());
  h["frozen"] = tags({bundle.frozen.begin(), bundle.frozen.end()});
  h["cosface"] = bundle.cosface ? json{{"scale", bundle.cosface->scale},
                                       {"margin", bundle.cosface->margin}}
                                : json(nullptr);
  json plist = json::array();
  for (const auto* p : params) {
    plist.push_back({{"name", p->name}, {"shape", p->value.shape()}});
  }
  h["parameters"] = plist;

  const auto& o = c.optimizer;
  json moments = json::array();
  for (std::size_t i = 0; i < o.names.size(); ++i) {
    moments.push_back({{"name", o.names[i]}, {"shape", o.first_moment[i].shape()}});
  }
  h["optimizer"] = {{"mode", ad::to_string(o.hyper.mode)},
                    {"learning_rate", o.hyper.learning_rate},
                    {"beta1", o.hyper.beta1},
                    {"beta2", o.hyper.beta2},
                    {"epsilon", o.hyper.epsilon},
                    {"weight_decay", o.hyper.weight_decay},
                    {"lr_decay", o.hyper.lr_decay},
                    {"current_lr", o.current_lr},
                    {"step_count", o.step_count},
                    {"moments", moments}};
  json hist = json::array();
  for (const auto& m : c.history) {
    hist.push_back({{"epoch", m.epoch},
                    {"train_loss", number(m.train_loss)},
                    {"val_balanced_accuracy", number(m.val_balanced_accuracy)}});
  }
  h["history"] = hist;
  json trace = json::array();
  for (double v : c.loss_trace) trace.push_back(number(v));
  h["loss_trace"] = trace;

  const std::string header = h.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (const auto* p : params) put_floats(out, p->value);
  for (const auto& m : o.first_moment) put_floats(out, m);
  for (const auto& v : o.second_moment) put_floats(out, v);
  return out;
}

Checkpoint deserialize(std::span<const std::uint8_t> b) {
  if (b.size() < kPreamble) throw FormatError("truncated checkpoint preamble", b.size());
  if (std::memcmp(b.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic, not a checkpoint file", 0);
  }
  const std::uint32_t version = get_u32(b, 4);
  if (version != kFormatVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                          " (this build reads version " +
                          std::to_string(kFormatVersion) + ")",
                      4);
  }
  const std::size_t header_len = get_u32(b, 8);
  if (kPreamble + header_len > b.size()) {
    throw FormatError("truncated checkpoint header (declares " +
                          std::to_string(header_len) + " bytes)",
                      b.size());
  }
  json h;
  try {
    h = json::parse(b.begin() + kPreamble, b.begin() + kPreamble + header_len);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what(),
                      kPreamble + (e.byte > 0 ? e.byte - 1 : 0));
  }

  Checkpoint c;
  std::vector<std::pair<std::string, ad::Shape>> declared, moments;
  try {
    const auto arch = arch_from(h.at("arch"));
    arch.validate();
    const auto subnets = h.at("subnets").get<std::vector<std::string>>();
    c.bundle = skeleton(arch, subnets, h.at("cosface"));
    if (tags(c.bundle.present()) != subnets) {
      throw FormatError("checkpoint sub-network list is not a known layout", kPreamble);
    }
    c.bundle.frozen.clear();
    for (const auto& t : h.at("frozen").get<std::vector<std::string>>()) {
      c.bundle.frozen.insert(subnet_from_tag(t));
    }
    c.frontend = frontend_from(h.at("frontend"));
    c.stage = h.at("stage").get<int>();
    c.iteration = h.at("iteration").get<std::uint64_t>();
    c.epoch = h.at("epoch").get<std::uint64_t>();
    for (const auto& p : h.at("parameters")) {
      declared.emplace_back(p.at("name").get<std::string>(),
                            p.at("shape").get<ad::Shape>());
    }
    const json& o = h.at("optimizer");
    auto& hy = c.optimizer.hyper;
    hy.mode = ad::optimizer_mode_from_string(o.at("mode").get<std::string>());
    hy.learning_rate = o.at("learning_rate").get<double>();
    hy.beta1 = o.at("beta1").get<double>();
    hy.beta2 = o.at("beta2").get<double>();
    hy.epsilon = o.at("epsilon").get<double>();
    hy.weight_decay = o.at("weight_decay").get<double>();
    hy.lr_decay = o.at("lr_decay").get<double>();
    c.optimizer.current_lr = o.at("current_lr").get<double>();
    c.optimizer.step_count = o.at("step_count").get<std::uint64_t>();
    for (const auto& m : o.at("moments")) {
      moments.emplace_back(m.at("name").get<std::string>(),
                           m.at("shape").get<ad::Shape>());
    }
    for (const auto& m : h.at("history")) {
      c.history.push_back({m.at("epoch").get<std::uint64_t>(),
                           to_number(m.at("train_loss")),
                           to_number(m.at("val_balanced_accuracy"))});
    }
    for (const auto& v : h.at("loss_trace")) c.loss_trace.push_back(to_number(v));
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what(), kPreamble);
  }

  auto params = c.bundle.parameters();
  if (params.size() != declared.size()) {
    throw FormatError("checkpoint declares " + std::to_string(declared.size()) +
                          " parameters, layout has " + std::to_string(params.size()),
                      kPreamble);
  }
  std::size_t floats = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name != declared[i].first ||
        params[i]->value.shape() != declared[i].second) {
      throw FormatError("parameter " + std::to_string(i) + " is " + declared[i].first +
                            " " + ad::shape_str(declared[i].second) + ", expected " +
                            params[i]->name + " " +
                            ad::shape_str(params[i]->value.shape()),
                        kPreamble);
    }
    floats += params[i]->value.numel();
  }
  for (const auto& m : moments) floats += 2 * ad::shape_numel(m.second);

  const std::size_t expected = kPreamble + header_len + 4 * floats;
  if (b.size() < expected) {
    throw FormatError("truncated checkpoint: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(b.size()),
                      b.size());
  }
  if (b.size() > expected) {
    throw FormatError("trailing bytes after checkpoint data", expected);
  }

  std::size_t off = kPreamble + header_len;
  auto read_tensor = [&](ad::Tensor& t) {
    for (float& f : t.data()) {
      f = std::bit_cast<float>(get_u32(b, off));
      off += 4;
    }
  };
  for (auto* p : params) read_tensor(p->value);
  for (const auto& [name, shape] : moments) {
    c.optimizer.names.push_back(name);
    c.optimizer.first_moment.emplace_back(shape);
  }
  for (auto& m : c.optimizer.first_moment) read_tensor(m);
  for (const auto& m : moments) c.optimizer.second_moment.emplace_back(m.second);
  for (auto& v : c.optimizer.second_moment) read_tensor(v);
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = serialize(c);
  auto tmp = path;
  tmp += ".tmp";
  io::write_file(tmp, bytes);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move checkpoint into '" + path.string() + "'");
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

}  // namespace dsvae::ckpt
