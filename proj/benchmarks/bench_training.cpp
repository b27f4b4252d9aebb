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

#include "dsvae/losses.hpp"
#include "dsvae/model.hpp"
#include "dsvae/optim.hpp"

using namespace dsvae;

namespace {

ad::Tensor batch(std::size_t n, const nn::Architecture& a) {
  Rng rng(9);
  ad::Tensor x({n, 1, a.n_mels, a.target_frames});
  for (float& v : x.data()) v = static_cast<float>(rng.normal());
  return x;
}

void BM_Stage1Step(benchmark::State& state) {
  const nn::Architecture arch;
  auto b = nn::ModelBundle::stage1(arch, 1);
  auto params = b.trainable_parameters();
  auto opt = ad::make_optimizer_state({}, params);
  const auto x = batch(32, arch);
  Rng noise(2);
  for (auto _ : state) {
    b.zero_grad();
    ad::Tape tape;
    const auto xv = tape.constant(x);
    const auto d = nn::encode(b, nn::LatentSource::kGeneral, xv);
    const auto xr = nn::decode_general(b, nn::reparameterize(d, noise));
    const auto l = loss::stage1_loss(xv, xr, d.mu, d.logvar, {});
    tape.backward(l.total);
    ad::optimizer_step(params, opt);
  }
}
BENCHMARK(BM_Stage1Step)->Unit(benchmark::kMillisecond);

void BM_Inference(benchmark::State& state) {
  const nn::Architecture arch;
  auto b = nn::ModelBundle::stage2(nn::ModelBundle::stage1(arch, 1), 2);
  const auto x = batch(static_cast<std::size_t>(state.range(0)), arch);
  for (auto _ : state) {
    auto r = nn::infer(b, x);
    benchmark::DoNotOptimize(r.scores.data());
  }
}
BENCHMARK(BM_Inference)->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
