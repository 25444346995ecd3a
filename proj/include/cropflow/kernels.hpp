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

#pragma once

#include <cstddef>
#include <span>

#include "cropflow/parallel.hpp"

// Dense row-major GEMM kernels used by the autodiff engine. Each overwrites
// its output. The optimized versions parallelize over output rows with
// OpenMP; every output element is accumulated in ascending inner index, so
// results do not depend on the thread count.
namespace cropflow::kernels {

// c[m,n] = a[m,k] * b[k,n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, Exec exec = Exec::Parallel);

// c[m,k] = a[m,n] * b[k,n]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, Exec exec = Exec::Parallel);

// c[k,n] = a[m,k]^T * b[m,n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, Exec exec = Exec::Parallel);

// Textbook triple loops, kept as the oracle for the kernels above.
namespace reference {
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c);
}  // namespace reference

}  // namespace cropflow::kernels
