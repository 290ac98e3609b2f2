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

#include "sbmatch/transform.hpp"

#include <cmath>

#include "sbmatch/error.hpp"

namespace sbm {
namespace {

constexpr int kBandSize[3] = {1, 4, 16};  // coarse, mid, fine

std::array<GroupInfo, kNumGroups> build_group_table() {
    std::array<GroupInfo, kNumGroups> table{};
    int offset = 0;
    for (int ch = 0; ch < kChannels; ++ch) {
        for (int scale = 0; scale < 3; ++scale) {
            for (int o = 0; o < 3; ++o) {
                const int size = kBandSize[scale];
                table[static_cast<std::size_t>(ch * 9 + scale * 3 + o)] = {
                    ch, scale, static_cast<Orientation>(o), offset, size};
                offset += size;
            }
        }
    }
    for (int ch = 0; ch < kChannels; ++ch) {
        table[static_cast<std::size_t>(27 + ch)] = {ch, -1, Orientation::scaling, offset, 1};
        ++offset;
    }
    return table;
}

std::array<std::uint8_t, kPatchValues> build_coefficient_groups() {
    std::array<std::uint8_t, kPatchValues> out{};
    const auto& table = group_table();
    for (int g = 0; g < kNumGroups; ++g)
        for (int i = 0; i < table[static_cast<std::size_t>(g)].size; ++i)
            out[static_cast<std::size_t>(table[static_cast<std::size_t>(g)].offset + i)] =
                static_cast<std::uint8_t>(g);
    return out;
}

// Offset of the band (channel, haar level, orientation); level 1 is finest.
int band_offset(int ch, int level, int orientation) {
    const int scale = kHaarLevels - level;
    return group_table()[static_cast<std::size_t>(ch * 9 + scale * 3 + orientation)].offset;
}

template <class T>
void haar_forward(T* plane, int ch, T* coeffs) {
    // plane: 8x8, overwritten by the approximation as levels proceed.
    T tmp[kPatchSize * kPatchSize];
    int n = kPatchSize;
    for (int level = 1; level <= kHaarLevels; ++level) {
        const int h = n / 2;
        T* hb = coeffs + band_offset(ch, level, 0);
        T* vb = coeffs + band_offset(ch, level, 1);
        T* db = coeffs + band_offset(ch, level, 2);
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < h; ++c) {
                const T x00 = plane[(2 * r) * kPatchSize + 2 * c];
                const T x01 = plane[(2 * r) * kPatchSize + 2 * c + 1];
                const T x10 = plane[(2 * r + 1) * kPatchSize + 2 * c];
                const T x11 = plane[(2 * r + 1) * kPatchSize + 2 * c + 1];
                tmp[r * h + c] = (x00 + x01 + x10 + x11) / T(2);
                hb[r * h + c] = (x00 - x01 + x10 - x11) / T(2);
                vb[r * h + c] = (x00 + x01 - x10 - x11) / T(2);
                db[r * h + c] = (x00 - x01 - x10 + x11) / T(2);
            }
        }
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < h; ++c) plane[r * kPatchSize + c] = tmp[r * h + c];
        n = h;
    }
    coeffs[group_table()[static_cast<std::size_t>(27 + ch)].offset] = plane[0];
}

template <class T>
void haar_inverse(const T* coeffs, int ch, T* plane) {
    plane[0] = coeffs[group_table()[static_cast<std::size_t>(27 + ch)].offset];
    T tmp[kPatchSize * kPatchSize];
    for (int level = kHaarLevels; level >= 1; --level) {
        const int h = kPatchSize >> level;
        const T* hb = coeffs + band_offset(ch, level, 0);
        const T* vb = coeffs + band_offset(ch, level, 1);
        const T* db = coeffs + band_offset(ch, level, 2);
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < h; ++c) {
                const T a = plane[r * kPatchSize + c];
                const T hv = hb[r * h + c], vv = vb[r * h + c], dv = db[r * h + c];
                tmp[(2 * r) * (2 * h) + 2 * c] = (a + hv + vv + dv) / T(2);
                tmp[(2 * r) * (2 * h) + 2 * c + 1] = (a - hv + vv - dv) / T(2);
                tmp[(2 * r + 1) * (2 * h) + 2 * c] = (a + hv - vv - dv) / T(2);
                tmp[(2 * r + 1) * (2 * h) + 2 * c + 1] = (a - hv - vv + dv) / T(2);
            }
        }
        for (int r = 0; r < 2 * h; ++r)
            for (int c = 0; c < 2 * h; ++c) plane[r * kPatchSize + c] = tmp[r * (2 * h) + c];
    }
}

}  // namespace

const std::array<GroupInfo, kNumGroups>& group_table() {
    static const auto table = build_group_table();
    return table;
}

const std::array<std::uint8_t, kPatchValues>& coefficient_groups() {
    static const auto groups = build_coefficient_groups();
    return groups;
}

ColorMatrix default_color_matrix() {
    const double a = 1.0 / std::sqrt(3.0), b = 1.0 / std::sqrt(2.0), c = 1.0 / std::sqrt(6.0);
    return {{{a, a, a}, {b, 0.0, -b}, {c, -2.0 * c, c}}};
}

void TransformSpec::validate() const {
    SBM_REQUIRE(levels == kHaarLevels && patch_size == kPatchSize,
                "TransformSpec: only 8x8 patches with 3 Haar levels are supported");
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += color_matrix[i][k] * color_matrix[j][k];
            SBM_REQUIRE(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12,
                        "TransformSpec: color matrix is not orthonormal");
        }
    }
}

template <class T>
void analyze(std::span<const T> patch, std::span<T> coeffs, const TransformSpec& spec) {
    SBM_REQUIRE(patch.size() == static_cast<std::size_t>(kPatchValues), "analyze: patch must be 8x8x3");
    SBM_REQUIRE(coeffs.size() == static_cast<std::size_t>(kPatchValues), "analyze: need 192 coefficients");
    const auto& m = spec.color_matrix;
    T planes[kChannels][kPatchSize * kPatchSize];
    for (int px = 0; px < kPatchSize * kPatchSize; ++px) {
        const T* rgb = &patch[static_cast<std::size_t>(px) * kChannels];
        for (int k = 0; k < kChannels; ++k)
            planes[k][px] = static_cast<T>(m[k][0]) * rgb[0] + static_cast<T>(m[k][1]) * rgb[1] +
                            static_cast<T>(m[k][2]) * rgb[2];
    }
    for (int ch = 0; ch < kChannels; ++ch) haar_forward(planes[ch], ch, coeffs.data());
}

template <class T>
void synthesize(std::span<const T> coeffs, std::span<T> patch, const TransformSpec& spec) {
    SBM_REQUIRE(coeffs.size() == static_cast<std::size_t>(kPatchValues),
                "synthesize: malformed coefficient vector (need 192)");
    SBM_REQUIRE(patch.size() == static_cast<std::size_t>(kPatchValues), "synthesize: patch must be 8x8x3");
    const auto& m = spec.color_matrix;
    T planes[kChannels][kPatchSize * kPatchSize];
    for (int ch = 0; ch < kChannels; ++ch) haar_inverse(coeffs.data(), ch, planes[ch]);
    // Inverse color rotation is the transpose.
    for (int px = 0; px < kPatchSize * kPatchSize; ++px) {
        T* rgb = &patch[static_cast<std::size_t>(px) * kChannels];
        for (int c = 0; c < kChannels; ++c)
            rgb[c] = static_cast<T>(m[0][c]) * planes[0][px] + static_cast<T>(m[1][c]) * planes[1][px] +
                     static_cast<T>(m[2][c]) * planes[2][px];
    }
}

template void analyze<float>(std::span<const float>, std::span<float>, const TransformSpec&);
template void analyze<double>(std::span<const double>, std::span<double>, const TransformSpec&);
template void synthesize<float>(std::span<const float>, std::span<float>, const TransformSpec&);
template void synthesize<double>(std::span<const double>, std::span<double>, const TransformSpec&);

}  // namespace sbm
