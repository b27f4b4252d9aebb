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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dsvae/dsp.hpp"
#include "dsvae/error.hpp"
#include "oracles.hpp"

using namespace dsvae;
using namespace dsvae::dsp;

namespace {

Waveform noise(std::size_t n, std::uint64_t seed, double fs = 16000.0) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  Waveform w;
  w.sample_rate = fs;
  w.samples.resize(n);
  for (float& s : w.samples) s = u(g);
  return w;
}

}  // namespace

TEST_CASE("hann window") {
  const auto w = hann_window(9);
  CHECK(w.front() == doctest::Approx(0.0));
  CHECK(w.back() == doctest::Approx(0.0));
  CHECK(w[4] == doctest::Approx(1.0));
  for (std::size_t k = 0; k < 9; ++k) CHECK(w[k] == doctest::Approx(w[8 - k]));
  CHECK_THROWS_AS(hann_window(1), ContractError);
}

TEST_CASE("mel scale") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(hz_to_mel(8000.0) ==
        doctest::Approx(2595.0 * std::log10(1.0 + 8000.0 / 700.0)).epsilon(1e-12));
  for (double f : {0.0, 10.0, 440.0, 3000.0, 7999.0})
    CHECK(mel_to_hz(hz_to_mel(f)) == doctest::Approx(f).epsilon(1e-10));
  CHECK_THROWS_AS(hz_to_mel(-1.0), ContractError);
}

TEST_CASE("stft frames and sizes") {
  StftParams p;
  CHECK(p.window_samples(16000) == 400);
  CHECK(p.hop_samples(16000) == 160);
  CHECK(p.resolved_fft_size(16000) == 512);
  const auto s = stft_magnitude(noise(16000, 1), p);
  CHECK(s.n_frames() == 98);
  CHECK(s.n_bins() == 257);
  CHECK(s.bin_hz[256] == doctest::Approx(8000.0));
  CHECK_THROWS_AS(stft_magnitude(noise(399, 1), p), InputError);
}

TEST_CASE("stft matches a direct DFT") {
  StftParams p;
  const auto x = noise(1200, 2);
  const auto s = stft_magnitude(x, p);
  const auto win = hann_window(400);
  for (std::size_t f : {0u, 3u, 5u}) {
    std::vector<double> frame(512, 0.0);
    for (std::size_t k = 0; k < 400; ++k) frame[k] = x.samples[f * 160 + k] * win[k];
    const auto mag = oracle::dft_magnitude(frame);
    for (std::size_t b = 0; b < 257; ++b) {
      INFO("frame " << f << " bin " << b);
      CHECK(s.values[b * s.n_frames() + f] == doctest::Approx(mag[b]).epsilon(1e-5));
    }
  }
}

TEST_CASE("fft rejects bad lengths") {
  std::vector<double> re(6), im(6);
  CHECK_THROWS_AS(fft_inplace(re, im), ContractError);
}

TEST_CASE("mel filterbank") {
  const auto fb = mel_filterbank(80, 512, 16000, 0, 8000);
  CHECK(fb.n_mels() == 80);
  CHECK(fb.n_bins() == 257);
  CHECK(fb.mel_edges.size() == 82);
  CHECK(fb.hz_edges.front() == doctest::Approx(0.0));
  CHECK(fb.hz_edges.back() == doctest::Approx(8000.0));
  for (std::size_t j = 0; j < 80; ++j) {
    double total = 0.0;
    for (std::size_t b = 0; b < 257; ++b) {
      const float w = fb.weights[j * 257 + b];
      REQUIRE(w >= 0.0f);
      REQUIRE(w <= 1.0f);
      const double hz = b * 16000.0 / 512;
      if (w > 0.0f) {
        CHECK(hz > fb.hz_edges[j]);
        CHECK(hz < fb.hz_edges[j + 2]);
      }
      total += w;
    }
    CHECK(total > 0.0);
  }
  // Mel edges are evenly spaced.
  const double step = fb.mel_edges[1] - fb.mel_edges[0];
  for (std::size_t i = 1; i < 82; ++i)
    CHECK(fb.mel_edges[i] - fb.mel_edges[i - 1] == doctest::Approx(step));
  CHECK_THROWS_AS(mel_filterbank(400, 512, 16000, 0, 8000), ContractError);
  CHECK_THROWS_AS(mel_filterbank(80, 500, 16000, 0, 8000), ContractError);
}

TEST_CASE("mel spectrogram shape and standardization") {
  Frontend fe{FrontendConfig{}};
  const auto m = fe(noise(16000, 3));
  REQUIRE(m.values.shape() == ad::Shape{80, 96});
  double mean = 0.0, sq = 0.0;
  for (float v : m.values.data()) mean += v;
  mean /= m.values.numel();
  for (float v : m.values.data()) sq += (v - mean) * (v - mean);
  // Standardization is over the natural 98 frames; cropping two changes little.
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::sqrt(sq / m.values.numel()) == doctest::Approx(1.0).epsilon(0.05));

  Waveform silence;
  silence.samples.assign(16000, 0.0f);
  for (float v : fe(silence).values.data()) CHECK(v == 0.0f);

  CHECK_THROWS_AS(fe(noise(16000, 3, 8000.0)), InputError);
  const auto fb = mel_filterbank(40, 1024, 16000, 0, 8000);
  CHECK_THROWS_AS(mel_spectrogram(fe.spectrogram(noise(16000, 3)), fb, {}),
                  DimensionError);
}

TEST_CASE("centre crop and reflect pad") {
  FrontendConfig natural_cfg;
  natural_cfg.norm.target_frames = 0;
  Frontend natural(natural_cfg);
  Frontend fixed{FrontendConfig{}};

  const auto x = noise(16000, 4);
  const auto n = natural(x).values;
  const auto c = fixed(x).values;
  REQUIRE(n.extent(1) == 98);
  for (std::size_t j = 0; j < 80; ++j)
    for (std::size_t f = 0; f < 96; ++f) REQUIRE(c[j * 96 + f] == n[j * 98 + f + 1]);

  const auto y = noise(8000, 5);
  const auto ny = natural(y).values;
  const auto py = fixed(y).values;
  REQUIRE(ny.extent(1) == 48);
  // left pad of 24 frames: output column 24 + k holds frame k, reflected outside.
  for (std::size_t j = 0; j < 80; ++j) {
    CHECK(py[j * 96 + 24] == ny[j * 48 + 0]);
    CHECK(py[j * 96 + 23] == ny[j * 48 + 1]);
    CHECK(py[j * 96 + 0] == ny[j * 48 + 24]);
    CHECK(py[j * 96 + 71] == ny[j * 48 + 47]);
    CHECK(py[j * 96 + 72] == ny[j * 48 + 46]);
  }
}
