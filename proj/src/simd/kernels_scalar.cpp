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

// Reference kernels. These define the semantics the vector versions are
// tested against; they favour obviousness over speed.

#include <cmath>

#include "sbmatch/simd/kernels.hpp"

namespace sbm::simd::detail {
namespace {

void sgemm_scalar(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                  int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int p = 0; p < k; ++p) {
                const float av = trans_a ? a[p * lda + i] : a[i * lda + p];
                const float bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
                acc += av * bv;
            }
            float& out = c[i * ldc + j];
            out = beta == 0.0f ? alpha * acc : alpha * acc + beta * out;
        }
    }
}

void weighted_accumulate_scalar(std::size_t n, const float* w, const float* x, float* acc,
                                float* wsum) {
    for (std::size_t i = 0; i < n; ++i) {
        acc[i] += w[i] * x[i];
        wsum[i] += w[i];
    }
}

void axpy_scalar(std::size_t n, float alpha, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_scalar(std::size_t n, float* p, float* g, float* m, float* v, float b1, float b2,
                 float lr_t, float eps_t) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
        p[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps_t);
        g[i] = 0.0f;
    }
}

}  // namespace

const KernelTable scalar_table{Isa::scalar, sgemm_scalar, weighted_accumulate_scalar, axpy_scalar,
                               adam_scalar};

}  // namespace sbm::simd::detail
