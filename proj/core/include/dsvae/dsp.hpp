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

#include <cstddef>
#include <vector>

#include "dsvae/tensor.hpp"

namespace dsvae::dsp {

struct Waveform {
  std::vector<float> samples;
  double sample_rate = 16000.0;
};

struct StftParams {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t fft_size = 0;  // 0 selects the next power of two >= window

  std::size_t window_samples(double sample_rate) const;
  std::size_t hop_samples(double sample_rate) const;
  std::size_t resolved_fft_size(double sample_rate) const;
};

/// Magnitude STFT, [n_bins, n_frames] with n_bins = fft_size / 2 + 1.
struct Spectrogram {
  ad::Tensor values;
  std::vector<double> bin_hz;

  std::size_t n_bins() const { return values.extent(0); }
  std::size_t n_frames() const { return values.extent(1); }
};

struct MelFilterbank {
  ad::Tensor weights;             // [n_mels, n_bins]
  std::vector<double> mel_edges;  // n_mels + 2, mel
  std::vector<double> hz_edges;   // n_mels + 2, Hz

  std::size_t n_mels() const { return weights.extent(0); }
  std::size_t n_bins() const { return weights.extent(1); }
};

/// How the log-mel matrix becomes fixed-size network input.
struct NormalizationPolicy {
  double log_epsilon = 1e-6;
  bool standardize = true;
  std::size_t target_frames = 96;  // 0 keeps the natural frame count
};

struct MelSpectrogram {
  ad::Tensor values;  // [n_mels, frames]
  double mean = 0.0;  // statistics removed by standardization
  double stddev = 1.0;
};

/// Everything needed to turn a waveform into model input.
struct FrontendConfig {
  double sample_rate = 16000.0;
  StftParams stft;
  std::size_t n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  NormalizationPolicy norm;

  friend bool operator==(const FrontendConfig& a, const FrontendConfig& b) {
    return a.sample_rate == b.sample_rate &&
           a.stft.window_ms == b.stft.window_ms &&
           a.stft.hop_ms == b.stft.hop_ms && a.stft.fft_size == b.stft.fft_size &&
           a.n_mels == b.n_mels && a.f_min == b.f_min && a.f_max == b.f_max &&
           a.norm.log_epsilon == b.norm.log_epsilon &&
           a.norm.standardize == b.norm.standardize &&
           a.norm.target_frames == b.norm.target_frames;
  }
};

/// Symmetric Hann window w[k] = 0.5 (1 - cos(2 pi k / (n - 1))).
std::vector<double> hann_window(std::size_t n);

/// n_frames = 1 + floor((N - win) / hop); each column is |DFT| of the
/// Hann-windowed, zero-padded frame over bins 0..fft_size/2.
Spectrogram stft_magnitude(const Waveform& x, const StftParams& p);

/// f_mel = 2595 log10(1 + f_hz / 700).
double hz_to_mel(double f_hz);
double mel_to_hz(double f_mel);

/// Triangular filters on the mel axis, edges equally spaced in mel between
/// f_min and f_max.
MelFilterbank mel_filterbank(std::size_t n_mels, std::size_t fft_size,
                             double sample_rate, double f_min, double f_max);

/// log(fb * s + eps), per-utterance standardization (all zeros when the
/// variance vanishes), then centre crop or reflect pad to target_frames.
MelSpectrogram mel_spectrogram(const Spectrogram& s, const MelFilterbank& fb,
                               const NormalizationPolicy& norm);

/// Waveform to network input with a cached filterbank.
class Frontend {
 public:
  explicit Frontend(FrontendConfig config);

  const FrontendConfig& config() const noexcept { return config_; }
  const MelFilterbank& filterbank() const noexcept { return filterbank_; }

  Spectrogram spectrogram(const Waveform& x) const;
  MelSpectrogram operator()(const Waveform& x) const;

 private:
  FrontendConfig config_;
  MelFilterbank filterbank_;
};

/// In-place radix-2 FFT on interleaved (re, im) pairs; n must be a power of
/// two.
void fft_inplace(std::vector<double>& re, std::vector<double>& im);

}  // namespace dsvae::dsp
