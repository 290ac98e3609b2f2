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

// NEON kernels for AArch64, where Advanced SIMD is part of the base ISA.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

#include "packed_gemm.hpp"
#include "sbmatch/simd/kernels.hpp"

namespace sbm::simd::detail {
namespace {

constexpr int kMr = 6;
constexpr int kNr = 16;

void micro_6x16(int kc, const float* a, const float* b, float* c, int ldc, float alpha) {
    float32x4_t acc[kMr][4];
    for (auto& row : acc)
        for (auto& q : row) q = vdupq_n_f32(0.0f);
    for (int p = 0; p < kc; ++p) {
        const float32x4_t b0 = vld1q_f32(b), b1 = vld1q_f32(b + 4);
        const float32x4_t b2 = vld1q_f32(b + 8), b3 = vld1q_f32(b + 12);
        for (int r = 0; r < kMr; ++r) {
            const float av = a[r];
            acc[r][0] = vfmaq_n_f32(acc[r][0], b0, av);
            acc[r][1] = vfmaq_n_f32(acc[r][1], b1, av);
            acc[r][2] = vfmaq_n_f32(acc[r][2], b2, av);
            acc[r][3] = vfmaq_n_f32(acc[r][3], b3, av);
        }
        a += kMr;
        b += kNr;
    }
    for (int r = 0; r < kMr; ++r) {
        float* cr = c + static_cast<std::ptrdiff_t>(r) * ldc;
        for (int q = 0; q < 4; ++q)
            vst1q_f32(cr + 4 * q, vfmaq_n_f32(vld1q_f32(cr + 4 * q), acc[r][q], alpha));
    }
}

void sgemm_neon(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    packed_sgemm<kMr, kNr>(micro_6x16, trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c,
                           ldc);
}

void weighted_accumulate_neon(std::size_t n, const float* w, const float* x, float* acc,
                              float* wsum) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t wv = vld1q_f32(w + i);
        vst1q_f32(acc + i, vfmaq_f32(vld1q_f32(acc + i), wv, vld1q_f32(x + i)));
        vst1q_f32(wsum + i, vaddq_f32(vld1q_f32(wsum + i), wv));
    }
    for (; i < n; ++i) {
        acc[i] += w[i] * x[i];
        wsum[i] += w[i];
    }
}

void axpy_neon(std::size_t n, float alpha, const float* x, float* y) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_n_f32(vld1q_f32(y + i), vld1q_f32(x + i), alpha));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void adam_neon(std::size_t n, float* p, float* g, float* m, float* v, float b1, float b2,
               float lr_t, float eps_t) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t gv = vld1q_f32(g + i);
        const float32x4_t mv = vaddq_f32(vmulq_n_f32(vld1q_f32(m + i), b1), vmulq_n_f32(gv, 1.0f - b1));
        const float32x4_t vv =
            vaddq_f32(vmulq_n_f32(vld1q_f32(v + i), b2), vmulq_n_f32(vmulq_f32(gv, gv), 1.0f - b2));
        const float32x4_t step =
            vdivq_f32(vmulq_n_f32(mv, lr_t), vaddq_f32(vsqrtq_f32(vv), vdupq_n_f32(eps_t)));
        vst1q_f32(m + i, mv);
        vst1q_f32(v + i, vv);
        vst1q_f32(p + i, vsubq_f32(vld1q_f32(p + i), step));
        vst1q_f32(g + i, vdupq_n_f32(0.0f));
    }
    for (; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
        p[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps_t);
        g[i] = 0.0f;
    }
}

}  // namespace

const KernelTable neon_table{Isa::neon, sgemm_neon, weighted_accumulate_neon, axpy_neon, adam_neon};

}  // namespace sbm::simd::detail

#endif
