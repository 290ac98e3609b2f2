// Copyright 2026 The sbmatch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Dense arithmetic kernels with runtime-selected implementations.
//
// Every kernel has a scalar reference version. On x86-64 an AVX2+FMA version
// is selected when the CPU supports it, on AArch64 a NEON version. The
// environment variable SBMATCH_SIMD=scalar forces the reference path.

#include <cstddef>
#include <string_view>

namespace sbm::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

// Row-major single-precision GEMM:
//   C[m x n] = alpha * op(A)[m x k] * op(B)[k x n] + beta * C
// op(A) = A (stored m x k, leading dim lda) or A^T (stored k x m) when trans_a.
// beta == 0 overwrites C without reading it.
using SgemmFn = void (*)(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                         const float* a, int lda, const float* b, int ldb, float beta, float* c,
                         int ldc);

// acc[i] += w[i] * x[i]; wsum[i] += w[i]
using WeightedAccumulateFn = void (*)(std::size_t n, const float* w, const float* x, float* acc,
                                      float* wsum);

// y[i] += alpha * x[i]
using AxpyFn = void (*)(std::size_t n, float alpha, const float* x, float* y);

// Adam moment update and parameter step for one entry.
//   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2;
//   p -= lr_t * m / (sqrt(v) + eps_t);  g = 0
// lr_t and eps_t already carry the bias corrections.
using AdamFn = void (*)(std::size_t n, float* p, float* g, float* m, float* v, float b1, float b2,
                        float lr_t, float eps_t);

struct KernelTable {
    Isa isa;
    SgemmFn sgemm;
    WeightedAccumulateFn weighted_accumulate;
    AxpyFn axpy;
    AdamFn adam;
};

bool isa_available(Isa isa);

// Table for a specific ISA. Throws std::invalid_argument if unavailable.
const KernelTable& kernels_for(Isa isa);

// Best available table, chosen once per process.
const KernelTable& kernels();

namespace detail {
extern const KernelTable scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace sbm::simd
