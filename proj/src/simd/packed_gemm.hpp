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

// Cache-blocked GEMM driver shared by the vector back ends. Operands are packed
// into MR-row / NR-column strips (zero padded), so the micro-kernel only ever
// sees full tiles; partial tiles go through a small stack buffer.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace sbm::simd::detail {

inline constexpr int kBlockK = 256;
inline constexpr int kBlockM = 96;
inline constexpr int kBlockN = 2048;

inline float load_op(const float* x, int ld, bool trans, int row, int col) {
    return trans ? x[static_cast<std::ptrdiff_t>(col) * ld + row]
                 : x[static_cast<std::ptrdiff_t>(row) * ld + col];
}

// Packs op(A)[i0:i0+mc, p0:p0+kc] as consecutive MR x kc strips, column-interleaved.
template <int MR>
void pack_a(const float* a, int lda, bool trans, int i0, int mc, int p0, int kc, float* out) {
    for (int is = 0; is < mc; is += MR) {
        const int rows = std::min(MR, mc - is);
        for (int p = 0; p < kc; ++p) {
            for (int r = 0; r < rows; ++r) out[r] = load_op(a, lda, trans, i0 + is + r, p0 + p);
            for (int r = rows; r < MR; ++r) out[r] = 0.0f;
            out += MR;
        }
    }
}

// Packs op(B)[p0:p0+kc, j0:j0+nc] as consecutive kc x NR strips, row-interleaved.
template <int NR>
void pack_b(const float* b, int ldb, bool trans, int p0, int kc, int j0, int nc, float* out) {
    for (int js = 0; js < nc; js += NR) {
        const int cols = std::min(NR, nc - js);
        for (int p = 0; p < kc; ++p) {
            if (!trans && cols == NR) {
                std::memcpy(out, b + static_cast<std::ptrdiff_t>(p0 + p) * ldb + j0 + js,
                            sizeof(float) * NR);
            } else {
                for (int c = 0; c < cols; ++c) out[c] = load_op(b, ldb, trans, p0 + p, j0 + js + c);
                for (int c = cols; c < NR; ++c) out[c] = 0.0f;
            }
            out += NR;
        }
    }
}

// MicroKernel: void(int kc, const float* a_strip, const float* b_strip,
//                   float* c, int ldc, float alpha)  computes C += alpha * A B
// on a full MR x NR tile.
template <int MR, int NR, class MicroKernel>
void packed_sgemm(MicroKernel&& micro, bool trans_a, bool trans_b, int m, int n, int k,
                  float alpha, const float* a, int lda, const float* b, int ldb, float beta,
                  float* c, int ldc) {
    if (m <= 0 || n <= 0) return;
    for (int i = 0; i < m; ++i) {
        float* row = c + static_cast<std::ptrdiff_t>(i) * ldc;
        if (beta == 0.0f) {
            std::fill(row, row + n, 0.0f);
        } else if (beta != 1.0f) {
            for (int j = 0; j < n; ++j) row[j] *= beta;
        }
    }
    if (k <= 0 || alpha == 0.0f) return;

    thread_local std::vector<float> a_buf;
    thread_local std::vector<float> b_buf;
    const int mc_max = std::min(kBlockM, m);
    const int nc_max = std::min(kBlockN, n);
    const int kc_max = std::min(kBlockK, k);
    a_buf.resize(static_cast<std::size_t>((mc_max + MR - 1) / MR * MR) * kc_max);
    b_buf.resize(static_cast<std::size_t>((nc_max + NR - 1) / NR * NR) * kc_max);

    alignas(64) float tile[MR * NR];
    for (int j0 = 0; j0 < n; j0 += kBlockN) {
        const int nc = std::min(kBlockN, n - j0);
        for (int p0 = 0; p0 < k; p0 += kBlockK) {
            const int kc = std::min(kBlockK, k - p0);
            pack_b<NR>(b, ldb, trans_b, p0, kc, j0, nc, b_buf.data());
            for (int i0 = 0; i0 < m; i0 += kBlockM) {
                const int mc = std::min(kBlockM, m - i0);
                pack_a<MR>(a, lda, trans_a, i0, mc, p0, kc, a_buf.data());
                for (int js = 0; js < nc; js += NR) {
                    const int cols = std::min(NR, nc - js);
                    const float* bp = b_buf.data() + static_cast<std::ptrdiff_t>(js) * kc;
                    for (int is = 0; is < mc; is += MR) {
                        const int rows = std::min(MR, mc - is);
                        const float* ap = a_buf.data() + static_cast<std::ptrdiff_t>(is) * kc;
                        float* cp = c + static_cast<std::ptrdiff_t>(i0 + is) * ldc + j0 + js;
                        if (rows == MR && cols == NR) {
                            micro(kc, ap, bp, cp, ldc, alpha);
                        } else {
                            std::fill(tile, tile + MR * NR, 0.0f);
                            micro(kc, ap, bp, tile, NR, alpha);
                            for (int r = 0; r < rows; ++r)
                                for (int q = 0; q < cols; ++q)
                                    cp[static_cast<std::ptrdiff_t>(r) * ldc + q] += tile[r * NR + q];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace sbm::simd::detail
