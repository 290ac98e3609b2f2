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

// Orthonormal patch transform: an opponent color rotation followed by a
// 3-level separable 2-D Haar wavelet on each 8x8 channel plane.
//
// The 192 coefficients are stored in a fixed canonical order of 30 groups:
//
//   g = channel * 9 + scale * 3 + orientation      for g < 27
//       scale:       0 = coarse (1 coeff), 1 = mid (4), 2 = fine (16)
//       orientation: 0 = H (derivative along columns), 1 = V (along rows), 2 = D
//   g = 27 + channel                                the scaling coefficients
//
// Inside a group, coefficients are row-major over the band. Checkpoints and
// score vectors depend on this order.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "sbmatch/image.hpp"

namespace sbm {

inline constexpr int kNumGroups = 30;
inline constexpr int kHaarLevels = 3;

enum class Orientation : std::uint8_t { horizontal, vertical, diagonal, scaling };

struct GroupInfo {
    int channel;
    int scale;  // 0 coarse .. 2 fine; -1 for scaling coefficients
    Orientation orientation;
    int offset;
    int size;
};

const std::array<GroupInfo, kNumGroups>& group_table();

// Group index of every coefficient slot.
const std::array<std::uint8_t, kPatchValues>& coefficient_groups();

using ColorMatrix = std::array<std::array<double, 3>, 3>;

// Rows (1,1,1)/sqrt3, (1,0,-1)/sqrt2, (1,-2,1)/sqrt6.
ColorMatrix default_color_matrix();

struct TransformSpec {
    static constexpr std::string_view wavelet = "haar-orthonormal";
    ColorMatrix color_matrix = default_color_matrix();
    int levels = kHaarLevels;
    int patch_size = kPatchSize;

    // Throws ContractError unless the matrix is orthonormal and the geometry is 8x8 / 3 levels.
    void validate() const;
};

template <class T>
struct SubbandCoeffs {
    std::array<T, kPatchValues> values{};

    std::span<T> group(int g) {
        const auto& info = group_table()[static_cast<std::size_t>(g)];
        return std::span<T>(values).subspan(static_cast<std::size_t>(info.offset),
                                            static_cast<std::size_t>(info.size));
    }
    std::span<const T> group(int g) const {
        const auto& info = group_table()[static_cast<std::size_t>(g)];
        return std::span<const T>(values).subspan(static_cast<std::size_t>(info.offset),
                                                  static_cast<std::size_t>(info.size));
    }
};

// patch: 8x8x3 raster in image layout (row-major, channel-interleaved).
template <class T>
void analyze(std::span<const T> patch, std::span<T> coeffs, const TransformSpec& spec = {});

template <class T>
void synthesize(std::span<const T> coeffs, std::span<T> patch, const TransformSpec& spec = {});

template <class T>
SubbandCoeffs<T> analyze(std::span<const T> patch, const TransformSpec& spec = {}) {
    SubbandCoeffs<T> out;
    analyze<T>(patch, out.values, spec);
    return out;
}

template <class T>
std::array<T, kPatchValues> synthesize(const SubbandCoeffs<T>& coeffs, const TransformSpec& spec = {}) {
    std::array<T, kPatchValues> out{};
    synthesize<T>(coeffs.values, out, spec);
    return out;
}

}  // namespace sbm
