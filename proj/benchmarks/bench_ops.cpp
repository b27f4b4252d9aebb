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

#include "dsvae/ops.hpp"
#include "dsvae/rng.hpp"

using namespace dsvae;

namespace {

ad::Tensor random_tensor(ad::Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  ad::Tensor t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({32, c, 40, 48}, 1);
  const auto k = random_tensor({2 * c, c, 3, 3}, 2);
  for (auto _ : state) {
    ad::Tape tape(false);
    auto y = ad::conv2d(tape.constant(x), tape.constant(k), 2, 1);
    benchmark::DoNotOptimize(y.value().raw());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto x = random_tensor({32, 16, 40, 48}, 1);
  const auto k = random_tensor({32, 16, 3, 3}, 2);
  for (auto _ : state) {
    ad::Tape tape;
    auto y = ad::conv2d(tape.variable(x), tape.variable(k), 2, 1);
    tape.backward(ad::sum(y));
  }
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

void BM_ConvTransposeForward(benchmark::State& state) {
  const auto x = random_tensor({32, 32, 20, 24}, 3);
  const auto k = random_tensor({32, 16, 4, 4}, 4);
  for (auto _ : state) {
    ad::Tape tape(false);
    auto y = ad::conv2d_transpose(tape.constant(x), tape.constant(k), 2, 1);
    benchmark::DoNotOptimize(y.value().raw());
  }
}
BENCHMARK(BM_ConvTransposeForward)->Unit(benchmark::kMillisecond);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_tensor({n, n}, 5);
  const auto b = random_tensor({n, n}, 6);
  for (auto _ : state) {
    ad::Tape tape(false);
    auto y = ad::matmul(tape.constant(a), tape.constant(b));
    benchmark::DoNotOptimize(y.value().raw());
  }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

}  // namespace
