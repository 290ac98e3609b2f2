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

#include "sbmatch/simd/kernels.hpp"

namespace sbm::nn {

// Row-major C = alpha op(A) op(B) + beta C. Single precision goes through the
// runtime-selected SIMD kernel; double precision (used for gradient checks)
// uses a plain loop.
template <class T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
          int ldb, T beta, T* c, int ldc);

template <>
inline void gemm<float>(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                        int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    simd::kernels().sgemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

template <>
inline void gemm<double>(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                         int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
        for (int j = 0; j < n; ++j) crow[j] = beta == 0.0 ? 0.0 : beta * crow[j];
        for (int p = 0; p < k; ++p) {
            const double av = alpha * (trans_a ? a[static_cast<std::ptrdiff_t>(p) * lda + i]
                                               : a[static_cast<std::ptrdiff_t>(i) * lda + p]);
            if (av == 0.0) continue;
            if (trans_b) {
                for (int j = 0; j < n; ++j) crow[j] += av * b[static_cast<std::ptrdiff_t>(j) * ldb + p];
            } else {
                const double* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

}  // namespace sbm::nn
