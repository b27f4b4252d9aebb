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

#include <benchmark/benchmark.h>

#include "dsvae/dsp.hpp"
#include "dsvae/rng.hpp"

using namespace dsvae;

namespace {

dsp::Waveform noise(double seconds) {
  Rng rng(7);
  dsp::Waveform w;
  w.samples.resize(static_cast<std::size_t>(seconds * w.sample_rate));
  for (float& s : w.samples) s = static_cast<float>(rng.uniform(-0.5, 0.5));
  return w;
}

void BM_Frontend(benchmark::State& state) {
  const dsp::Frontend fe{dsp::FrontendConfig{}};
  const auto x = noise(static_cast<double>(state.range(0)));
  for (auto _ : state) {
    auto m = fe(x);
    benchmark::DoNotOptimize(m.values.raw());
  }
}
BENCHMARK(BM_Frontend)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Fft512(benchmark::State& state) {
  std::vector<double> re(512), im(512);
  Rng rng(8);
  for (double& v : re) v = rng.normal();
  for (auto _ : state) {
    auto r = re;
    auto i = im;
    dsp::fft_inplace(r, i);
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(BM_Fft512);

}  // namespace
