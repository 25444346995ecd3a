// Copyright 2026 The Cropflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference paths against their OpenMP versions, plus the textbook
// GEMM loops. Run with --benchmark_filter to pick a family.

#include <benchmark/benchmark.h>

#include <vector>

#include "cropflow/dataset.hpp"
#include "cropflow/forest.hpp"
#include "cropflow/kernels.hpp"
#include "cropflow/preprocess.hpp"
#include "cropflow/rng.hpp"
#include "cropflow/separability.hpp"
#include "cropflow/synth.hpp"

namespace cropflow {
namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void BM_GemmReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    kernels::reference::gemm_nn(n, n, n, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n * n * n));
}

void BM_Gemm(benchmark::State& state, Exec exec) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    kernels::gemm_nn(n, n, n, a, b, c, exec);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n * n * n));
}

void BM_GemmNT(benchmark::State& state, Exec exec) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    kernels::gemm_nt(n, n, n, a, b, c, exec);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n * n * n));
}

void BM_PairwiseDtw(benchmark::State& state, Exec exec) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<double>> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = random_values(23, 10 + i);
    b[i] = random_values(23, 5000 + i);
  }
  for (auto _ : state) benchmark::DoNotOptimize(mean_pairwise_dtw(a, b, {}, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n * n));
}

const synth::Dataset& pixels() {
  static const synth::Dataset d =
      synth::generate(synth::default_profile(), {300, 300, 300}, synth::ShiftSpec{}, 3);
  return d;
}

void BM_Preprocess(benchmark::State& state, Method method, Exec exec) {
  PreprocessSpec spec;
  spec.method = method;
  spec.channels = ChannelSet::OpticalVISar;
  for (auto _ : state) benchmark::DoNotOptimize(preprocess_all(pixels().pixels, spec, exec));
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(pixels().pixels.size()));
}

void BM_Forest(benchmark::State& state, Exec exec) {
  const auto data = join_labels(preprocess_all(pixels().pixels, PreprocessSpec{}), pixels().labels);
  const auto m = to_matrix(data, data.all_indices());
  const ForestConfig cfg{static_cast<std::size_t>(state.range(0)), 8, 1};
  for (auto _ : state) benchmark::DoNotOptimize(train_forest(m, cfg, exec));
}

BENCHMARK(BM_GemmReference)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_Gemm, serial, Exec::Serial)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_Gemm, parallel, Exec::Parallel)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_GemmNT, serial, Exec::Serial)->Arg(256);
BENCHMARK_CAPTURE(BM_GemmNT, parallel, Exec::Parallel)->Arg(256);
BENCHMARK_CAPTURE(BM_PairwiseDtw, serial, Exec::Serial)->Arg(100);
BENCHMARK_CAPTURE(BM_PairwiseDtw, parallel, Exec::Parallel)->Arg(100);
BENCHMARK_CAPTURE(BM_Preprocess, ln7_serial, Method::LN7, Exec::Serial);
BENCHMARK_CAPTURE(BM_Preprocess, ln7_parallel, Method::LN7, Exec::Parallel);
BENCHMARK_CAPTURE(BM_Preprocess, ln7we_parallel, Method::LN7Smoothed, Exec::Parallel);
BENCHMARK_CAPTURE(BM_Forest, serial, Exec::Serial)->Arg(50)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Forest, parallel, Exec::Parallel)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace cropflow

BENCHMARK_MAIN();
