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

// Score-weighted sub-band averaging and the two training objectives.
//
// For reference coefficients s_i, candidates s_j and scores m_ij (one per
// group g), the estimate is
//
//   r_hat^g = (s_i^g + sum_j m_ij^g s_j^g) / (1 + sum_j m_ij^g)
//
// loss_full is sum_g |r_hat^g - r^g|^2 against the clean coefficients r, with
// gradient
//
//   dL/dm_ij^g = 2 <r_hat^g - r^g, s_j^g - r_hat^g> / (1 + sum_k m_ik^g).
//
// loss_pair is the single-candidate objective with the cross term dropped:
//
//   L_ij = sum_g (|s_i^g - r^g|^2 + (m^g)^2 |s_j^g - r^g|^2) / (1 + m^g)^2,
//   dL/dm^g = 2 (m^g |s_j^g - r^g|^2 - |s_i^g - r^g|^2) / (1 + m^g)^3.
//
// Gradients flow only into the scores; coefficients are observed constants.

#include <functional>
#include <span>
#include <vector>

#include "sbmatch/image.hpp"
#include "sbmatch/matcher.hpp"
#include "sbmatch/transform.hpp"

namespace sbm {

template <class T>
struct AggregationInput {
    std::span<const T> reference;               // 192 coefficients
    std::vector<std::span<const T>> candidates;  // each 192 coefficients
    std::span<const T> scores;                  // candidates.size() x 30, row-major

    void validate() const;
};

template <class T>
struct DenoisedPatch {
    SubbandCoeffs<T> coeffs;
    std::array<T, kPatchValues> pixels{};
};

template <class T>
SubbandCoeffs<T> aggregate_coeffs(const AggregationInput<T>& input);

template <class T>
DenoisedPatch<T> aggregate(const AggregationInput<T>& input, const TransformSpec& spec = {});

template <class T>
struct FullLoss {
    T loss = T(0);
    SubbandCoeffs<T> estimate;
    std::vector<T> grad_scores;  // candidates x 30
};

template <class T>
FullLoss<T> loss_full(std::span<const T> clean, const AggregationInput<T>& input);

template <class T>
struct PairLoss {
    T loss = T(0);
    ScoreVector<T> grad{};
};

template <class T>
PairLoss<T> loss_pair(std::span<const T> clean, std::span<const T> reference, std::span<const T> candidate,
                      std::span<const T> scores);

// Supplies scores for a batch of references: out[(sum of member counts) x 30],
// references in order, members in order.
using ScoreProvider = std::function<void(std::span<const PatchRef> refs,
                                         std::span<const std::vector<PatchRef>> members, std::span<float> out)>;

struct Stage1Options {
    int window_radius = 15;
    int ref_batch = 16;  // references scored per comparison pass
};

// Full match-average pass: stride-1 windows, scores, per-patch averaging in
// coefficient space, inverse transform, per-pixel mean over patches.
Image match_average(const Image& noisy, int window_radius, const ScoreProvider& scores, int ref_batch = 16);

Image denoise_stage1(const Image& noisy, const Matcher<float>& matcher, const Stage1Options& options = {});

}  // namespace sbm
