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
#include <string>
#include <vector>

#include "dsvae/rng.hpp"

namespace dsvae::toy {

/// Synthetic-speech families the generator knows:
///   G01  low-pass at 3 kHz
///   G02  every other hop-length segment repeats the previous one
///   G03  added 6 kHz tone
///   G04  low-pass at 4 kHz plus repeats at twice the hop
inline const std::vector<std::string> kFamilies{"G01", "G02", "G03", "G04"};

struct ToyConfig {
  std::size_t train_per_class = 200;
  std::size_t dev_per_class = 50;
  std::size_t eval_per_class = 100;
  double clip_seconds = 1.0;
  std::uint32_t sample_rate = 16000;
  /// Families in train, dev and eval.
  std::vector<std::string> known_families{"G01", "G02", "G03"};
  /// Families that only appear in eval.
  std::vector<std::string> unknown_families{"G04"};
  /// Synthetic clips per bona fide clip.
  double imbalance_ratio = 1.0;
  std::uint64_t seed = 1234;

  void validate() const;
  std::size_t samples_per_clip() const;

  friend bool operator==(const ToyConfig&, const ToyConfig&) = default;
};

ToyConfig parse_toy_config(const std::string& json_text);
ToyConfig load_toy_config(const std::filesystem::path& path);
std::string format_toy_config(const ToyConfig& cfg);

/// Harmonic "voice" with vibrato over a tilted noise floor.
std::vector<double> bonafide_signal(Rng& rng, std::size_t n, double sample_rate);

/// Applies family `id`'s artifact to `x`.
std::vector<double> apply_family(const std::string& id, std::vector<double> x,
                                 double sample_rate);

/// Windowed-sinc (Blackman) low-pass, odd `taps`, unit DC gain.
std::vector<double> lowpass_fir(double cutoff_hz, double sample_rate,
                                std::size_t taps);

/// One clip, peak-normalised, from its own seed. `family` is "bonafide" or
/// a family id.
std::vector<std::int16_t> render_clip(const ToyConfig& cfg,
                                      const std::string& family,
                                      std::uint64_t clip_seed);

/// Writes `<split>/<split>_<index>_<family>.wav` files and `manifest.csv`
/// under `out_dir` and returns the manifest path. Clip i draws its noise
/// from derive_seed(seed, i), so output bytes depend only on `cfg`.
std::filesystem::path generate_toy_dataset(const ToyConfig& cfg,
                                           const std::filesystem::path& out_dir);

}  // namespace dsvae::toy
