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

#include "cropflow/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace cropflow::kernels {

namespace {

// Rows below this are not worth a parallel region.
constexpr std::size_t kParallelWork = 1 << 15;

bool go_parallel(Exec exec, std::size_t work) {
  return exec == Exec::Parallel && work >= kParallelWork && worker_threads() > 1;
}

constexpr std::size_t kRows = 6;
constexpr std::size_t kCols = 8;

// Four packed doubles; lowered to SSE pairs when AVX is unavailable.
typedef double v4d __attribute__((vector_size(32)));

inline v4d load4(const double* p) {
  v4d v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store4(double* p, v4d v) { std::memcpy(p, &v, sizeof v); }

// C[i0:i0+R, j0:j0+W] = A[i0:i0+R, :] * B[:, j0:j0+W], accumulated in order
// of p so every entry sees the same summation sequence as the reference.
// Rows of the shared dimension per pass, so the B panel stays in cache.
constexpr std::size_t kDepth = 256;

// With `resume` the tile continues from the partial sums already in C.
template <std::size_t R, std::size_t W>
inline void tile(std::size_t i0, std::size_t j0, std::size_t p0, std::size_t p1, std::size_t k,
                 std::size_t n, const double* A, const double* B, double* C, bool resume) {
  if constexpr (W == kCols) {
    v4d acc[R][2] = {};
    if (resume) {
      for (std::size_t r = 0; r < R; ++r) {
        acc[r][0] = load4(C + (i0 + r) * n + j0);
        acc[r][1] = load4(C + (i0 + r) * n + j0 + 4);
      }
    }
    for (std::size_t p = p0; p < p1; ++p) {
      const v4d b0 = load4(B + p * n + j0);
      const v4d b1 = load4(B + p * n + j0 + 4);
      for (std::size_t r = 0; r < R; ++r) {
        const double av = A[(i0 + r) * k + p];
        const v4d a = {av, av, av, av};
        acc[r][0] += a * b0;
        acc[r][1] += a * b1;
      }
    }
    for (std::size_t r = 0; r < R; ++r) {
      store4(C + (i0 + r) * n + j0, acc[r][0]);
      store4(C + (i0 + r) * n + j0 + 4, acc[r][1]);
    }
  } else {
    double acc[R][W] = {};
    if (resume) {
      for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t j = 0; j < W; ++j) acc[r][j] = C[(i0 + r) * n + j0 + j];
      }
    }
    for (std::size_t p = p0; p < p1; ++p) {
      const double* bp = B + p * n + j0;
      for (std::size_t r = 0; r < R; ++r) {
        const double av = A[(i0 + r) * k + p];
        for (std::size_t j = 0; j < W; ++j) acc[r][j] += av * bp[j];
      }
    }
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t j = 0; j < W; ++j) C[(i0 + r) * n + j0 + j] = acc[r][j];
    }
  }
}

template <std::size_t R>
void row_block(std::size_t i0, std::size_t p0, std::size_t p1, std::size_t k, std::size_t n,
               const double* A, const double* B, double* C) {
  const bool resume = p0 > 0;
  std::size_t j0 = 0;
  for (; j0 + kCols <= n; j0 += kCols) tile<R, kCols>(i0, j0, p0, p1, k, n, A, B, C, resume);
  for (; j0 < n; ++j0) tile<R, 1>(i0, j0, p0, p1, k, n, A, B, C, resume);
}

void nn_rows(std::size_t m, std::size_t k, std::size_t n, const double* A, const double* B,
             double* C, Exec exec) {
  if (k == 0) {
    std::fill(C, C + m * n, 0.0);
    return;
  }
  const auto blocks = static_cast<long long>(m / kRows);
  const bool parallel = go_parallel(exec, m * k * n);
  for (std::size_t p0 = 0; p0 < k; p0 += kDepth) {
    const std::size_t p1 = std::min(k, p0 + kDepth);
#pragma omp parallel for schedule(static) if (parallel)
    for (long long bb = 0; bb < blocks; ++bb) {
      row_block<kRows>(static_cast<std::size_t>(bb) * kRows, p0, p1, k, n, A, B, C);
    }
    for (std::size_t i = static_cast<std::size_t>(blocks) * kRows; i < m; ++i) {
      row_block<1>(i, p0, p1, k, n, A, B, C);
    }
  }
}

std::vector<double> transposed(std::size_t rows, std::size_t cols, const double* src) {
  std::vector<double> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = src[r * cols + c];
  }
  return t;
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, Exec exec) {
  nn_rows(m, k, n, a.data(), b.data(), c.data(), exec);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, Exec exec) {
  const auto bt = transposed(k, n, b.data());
  nn_rows(m, n, k, a.data(), bt.data(), c.data(), exec);
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, Exec exec) {
  const auto at = transposed(m, k, a.data());
  nn_rows(k, m, n, at.data(), b.data(), c.data(), exec);
}

namespace reference {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * b[p * n + j];
      c[i * k + p] = s;
    }
  }
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[i * k + p] * b[i * n + j];
      c[p * n + j] = s;
    }
  }
}

}  // namespace reference

}  // namespace cropflow::kernels
