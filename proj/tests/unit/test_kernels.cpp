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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "cropflow/kernels.hpp"
#include "cropflow/rng.hpp"

namespace cropflow {
namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

void expect_close(const std::vector<double>& got, const std::vector<double>& want,
                  std::size_t depth) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], want[i], 1e-14 * static_cast<double>(depth + 1)) << i;
  }
}

struct Dims {
  std::size_t m, k, n;
};

// Odd sizes hit every remainder path of the blocked kernels.
const Dims kDims[] = {{1, 1, 1}, {3, 5, 7}, {17, 33, 9}, {64, 64, 64}, {70, 129, 31}, {2, 300, 5}};

TEST(Kernels, GemmNnMatchesReference) {
  Rng rng(1);
  for (const auto& d : kDims) {
    const auto a = random_vec(d.m * d.k, rng), b = random_vec(d.k * d.n, rng);
    std::vector<double> ref(d.m * d.n), ser(d.m * d.n, 7.0), par(d.m * d.n, 7.0);
    kernels::reference::gemm_nn(d.m, d.k, d.n, a, b, ref);
    kernels::gemm_nn(d.m, d.k, d.n, a, b, ser, Exec::Serial);
    kernels::gemm_nn(d.m, d.k, d.n, a, b, par, Exec::Parallel);
    expect_close(ser, ref, d.k);
    EXPECT_EQ(ser, par);
  }
}

TEST(Kernels, GemmNtMatchesReference) {
  Rng rng(2);
  for (const auto& d : kDims) {
    // a is m x n, b is k x n, c = a * b^T is m x k
    const auto a = random_vec(d.m * d.n, rng), b = random_vec(d.k * d.n, rng);
    std::vector<double> ref(d.m * d.k), ser(d.m * d.k, 7.0), par(d.m * d.k, 7.0);
    kernels::reference::gemm_nt(d.m, d.n, d.k, a, b, ref);
    kernels::gemm_nt(d.m, d.n, d.k, a, b, ser, Exec::Serial);
    kernels::gemm_nt(d.m, d.n, d.k, a, b, par, Exec::Parallel);
    expect_close(ser, ref, d.n);
    EXPECT_EQ(ser, par);
  }
}

TEST(Kernels, GemmTnMatchesReference) {
  Rng rng(3);
  for (const auto& d : kDims) {
    // a is m x k, b is m x n, c = a^T * b is k x n
    const auto a = random_vec(d.m * d.k, rng), b = random_vec(d.m * d.n, rng);
    std::vector<double> ref(d.k * d.n), ser(d.k * d.n, 7.0), par(d.k * d.n, 7.0);
    kernels::reference::gemm_tn(d.m, d.k, d.n, a, b, ref);
    kernels::gemm_tn(d.m, d.k, d.n, a, b, ser, Exec::Serial);
    kernels::gemm_tn(d.m, d.k, d.n, a, b, par, Exec::Parallel);
    expect_close(ser, ref, d.m);
    EXPECT_EQ(ser, par);
  }
}

TEST(Kernels, HandProduct) {
  const std::vector<double> a = {1, 2, 3, 4, 5, 6};  // 2 x 3
  const std::vector<double> b = {7, 8, 9, 10, 11, 12};  // 3 x 2
  std::vector<double> c(4);
  kernels::gemm_nn(2, 3, 2, a, b, c);
  EXPECT_EQ(c, (std::vector<double>{58, 64, 139, 154}));
}

TEST(Kernels, ParallelResultIndependentOfThreadCount) {
  Rng rng(4);
  const auto a = random_vec(90 * 40, rng), b = random_vec(40 * 50, rng);
  std::vector<double> one(90 * 50), many(90 * 50);
  set_worker_threads(1);
  kernels::gemm_nn(90, 40, 50, a, b, one);
  set_worker_threads(4);
  kernels::gemm_nn(90, 40, 50, a, b, many);
  set_worker_threads(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  EXPECT_EQ(one, many);
}

}  // namespace
}  // namespace cropflow
