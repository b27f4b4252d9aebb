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

#include "dsvae/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dsvae/error.hpp"

namespace dsvae::dsp {
namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Index into [0, n) reflecting about the edges without repeating them.
std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t r = i % period;
  if (r < 0) r += period;
  if (r >= static_cast<std::ptrdiff_t>(n)) r = period - r;
  return static_cast<std::size_t>(r);
}

}  // namespace

std::size_t StftParams::window_samples(double sample_rate) const {
  return static_cast<std::size_t>(std::lround(sample_rate * window_ms / 1000.0));
}

std::size_t StftParams::hop_samples(double sample_rate) const {
  return static_cast<std::size_t>(std::lround(sample_rate * hop_ms / 1000.0));
}

std::size_t StftParams::resolved_fft_size(double sample_rate) const {
  const std::size_t win = window_samples(sample_rate);
  if (fft_size == 0) return next_pow2(win);
  if (!is_pow2(fft_size) || fft_size < win) {
    throw ContractError("fft_size " + std::to_string(fft_size) +
                        " must be a power of two >= window length " +
                        std::to_string(win));
  }
  return fft_size;
}

std::vector<double> hann_window(std::size_t n) {
  if (n < 2) throw ContractError("hann_window needs n >= 2");
  std::vector<double> w(n);
  const double denom = static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * k / denom));
  }
  // Pin the exact symmetry that cos rounding may break by an ulp.
  for (std::size_t k = 0; k < n / 2; ++k) w[n - 1 - k] = w[k];
  return w;
}

void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  if (!is_pow2(n) || im.size() != n) {
    throw ContractError("fft_inplace needs equal power-of-two lengths");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t k = 0; k < len / 2; ++k) {
      const double wr = std::cos(ang * k);
      const double wi = std::sin(ang * k);
      for (std::size_t i = k; i < n; i += len) {
        const std::size_t j = i + len / 2;
        const double tr = re[j] * wr - im[j] * wi;
        const double ti = re[j] * wi + im[j] * wr;
        re[j] = re[i] - tr;
        im[j] = im[i] - ti;
        re[i] += tr;
        im[i] += ti;
      }
    }
  }
}

Spectrogram stft_magnitude(const Waveform& x, const StftParams& p) {
  if (!(x.sample_rate > 0.0)) throw InputError("sample rate must be positive");
  const std::size_t win = p.window_samples(x.sample_rate);
  const std::size_t hop = p.hop_samples(x.sample_rate);
  const std::size_t nfft = p.resolved_fft_size(x.sample_rate);
  if (hop == 0) throw ContractError("hop must be at least one sample");
  if (x.samples.size() < win) {
    throw InputError("signal of " + std::to_string(x.samples.size()) +
                     " samples is shorter than the " + std::to_string(win) +
                     "-sample window");
  }
  const std::size_t frames = 1 + (x.samples.size() - win) / hop;
  const std::size_t bins = nfft / 2 + 1;
  const auto window = hann_window(win);

  Spectrogram s;
  s.values = ad::Tensor({bins, frames});
  s.bin_hz.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    s.bin_hz[b] = static_cast<double>(b) * x.sample_rate / static_cast<double>(nfft);
  }
  std::vector<double> re(nfft), im(nfft);
  for (std::size_t f = 0; f < frames; ++f) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const float* frame = x.samples.data() + f * hop;
    for (std::size_t k = 0; k < win; ++k) re[k] = frame[k] * window[k];
    fft_inplace(re, im);
    for (std::size_t b = 0; b < bins; ++b) {
      s.values[b * frames + f] =
          static_cast<float>(std::sqrt(re[b] * re[b] + im[b] * im[b]));
    }
  }
  return s;
}

double hz_to_mel(double f_hz) {
  if (!(f_hz >= 0.0)) throw ContractError("hz_to_mel: negative frequency");
  return 2595.0 * std::log10(1.0 + f_hz / 700.0);
}

double mel_to_hz(double f_mel) {
  return 700.0 * (std::pow(10.0, f_mel / 2595.0) - 1.0);
}

MelFilterbank mel_filterbank(std::size_t n_mels, std::size_t fft_size,
                             double sample_rate, double f_min, double f_max) {
  if (n_mels < 1 || !(f_min >= 0.0) || !(f_min < f_max) ||
      f_max > sample_rate / 2.0 || !is_pow2(fft_size)) {
    throw ContractError("mel_filterbank: need n_mels >= 1, power-of-two FFT and "
                        "0 <= f_min < f_max <= sample_rate / 2");
  }
  const std::size_t bins = fft_size / 2 + 1;
  MelFilterbank fb;
  fb.weights = ad::Tensor({n_mels, bins});
  const double lo = hz_to_mel(f_min);
  const double hi = hz_to_mel(f_max);
  for (std::size_t i = 0; i < n_mels + 2; ++i) {
    const double m = lo + (hi - lo) * static_cast<double>(i) /
                              static_cast<double>(n_mels + 1);
    fb.mel_edges.push_back(m);
    fb.hz_edges.push_back(mel_to_hz(m));
  }
  for (std::size_t b = 0; b < bins; ++b) {
    const double m = hz_to_mel(static_cast<double>(b) * sample_rate /
                               static_cast<double>(fft_size));
    for (std::size_t j = 0; j < n_mels; ++j) {
      const double l = fb.mel_edges[j], c = fb.mel_edges[j + 1],
                   r = fb.mel_edges[j + 2];
      double w = 0.0;
      if (m > l && m <= c) {
        w = (m - l) / (c - l);
      } else if (m > c && m < r) {
        w = (r - m) / (r - c);
      }
      fb.weights[j * bins + b] = static_cast<float>(w);
    }
  }
  for (std::size_t j = 0; j < n_mels; ++j) {
    const float* row = fb.weights.raw() + j * bins;
    if (std::none_of(row, row + bins, [](float w) { return w > 0.0f; })) {
      throw ContractError("mel_filterbank: filter " + std::to_string(j) +
                          " covers no FFT bin; reduce n_mels or grow fft_size");
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const Spectrogram& s, const MelFilterbank& fb,
                               const NormalizationPolicy& norm) {
  if (fb.n_bins() != s.n_bins()) {
    throw DimensionError("mel_spectrogram: filterbank has " +
                         std::to_string(fb.n_bins()) + " bins, spectrogram " +
                         std::to_string(s.n_bins()));
  }
  const std::size_t mels = fb.n_mels(), bins = s.n_bins(), frames = s.n_frames();
  std::vector<double> logmel(mels * frames);
  for (std::size_t j = 0; j < mels; ++j) {
    const float* w = fb.weights.raw() + j * bins;
    for (std::size_t f = 0; f < frames; ++f) {
      double acc = 0.0;
      for (std::size_t b = 0; b < bins; ++b) {
        if (w[b] != 0.0f) acc += double(w[b]) * s.values[b * frames + f];
      }
      logmel[j * frames + f] = std::log(acc + norm.log_epsilon);
    }
  }

  MelSpectrogram out;
  if (norm.standardize) {
    double mean = 0.0;
    for (double v : logmel) mean += v;
    mean /= static_cast<double>(logmel.size());
    double var = 0.0;
    for (double v : logmel) var += (v - mean) * (v - mean);
    var /= static_cast<double>(logmel.size());
    const double sd = std::sqrt(var);
    out.mean = mean;
    out.stddev = sd;
    for (double& v : logmel) v = sd > 1e-12 ? (v - mean) / sd : 0.0;
  }

  const std::size_t target = norm.target_frames == 0 ? frames : norm.target_frames;
  out.values = ad::Tensor({mels, target});
  if (frames >= target) {
    const std::size_t offset = (frames - target) / 2;
    for (std::size_t j = 0; j < mels; ++j)
      for (std::size_t f = 0; f < target; ++f)
        out.values[j * target + f] =
            static_cast<float>(logmel[j * frames + offset + f]);
  } else {
    const auto left = static_cast<std::ptrdiff_t>((target - frames) / 2);
    for (std::size_t j = 0; j < mels; ++j)
      for (std::size_t f = 0; f < target; ++f) {
        const std::size_t src =
            reflect_index(static_cast<std::ptrdiff_t>(f) - left, frames);
        out.values[j * target + f] = static_cast<float>(logmel[j * frames + src]);
      }
  }
  return out;
}

Frontend::Frontend(FrontendConfig config)
    : config_(config),
      filterbank_(mel_filterbank(config.n_mels,
                                 config.stft.resolved_fft_size(config.sample_rate),
                                 config.sample_rate, config.f_min, config.f_max)) {}

Spectrogram Frontend::spectrogram(const Waveform& x) const {
  if (x.sample_rate != config_.sample_rate) {
    throw InputError("waveform sample rate " + std::to_string(x.sample_rate) +
                     " differs from configured " +
                     std::to_string(config_.sample_rate));
  }
  return stft_magnitude(x, config_.stft);
}

MelSpectrogram Frontend::operator()(const Waveform& x) const {
  return mel_spectrogram(spectrogram(x), filterbank_, config_.norm);
}

}  // namespace dsvae::dsp
