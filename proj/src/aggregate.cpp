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

#include "sbmatch/aggregate.hpp"

#include <algorithm>

#include "sbmatch/simd/kernels.hpp"

namespace sbm {
namespace {

// Expands 30 group scores to one weight per coefficient slot.
template <class T>
void expand_scores(const T* scores, T* weights) {
    const auto& groups = coefficient_groups();
    for (int c = 0; c < kPatchValues; ++c) weights[c] = scores[groups[static_cast<std::size_t>(c)]];
}

template <class T>
void weighted_accumulate(const T* w, const T* x, T* acc, T* wsum) {
    if constexpr (std::is_same_v<T, float>) {
        simd::kernels().weighted_accumulate(kPatchValues, w, x, acc, wsum);
    } else {
        for (int c = 0; c < kPatchValues; ++c) {
            acc[c] += w[c] * x[c];
            wsum[c] += w[c];
        }
    }
}

// acc / wsum in place, per group denominator (1 + sum_j m_j^g) per slot.
template <class T>
void weighted_sums(const AggregationInput<T>& input, std::array<T, kPatchValues>& acc,
                   std::array<T, kPatchValues>& wsum) {
    std::copy(input.reference.begin(), input.reference.end(), acc.begin());
    wsum.fill(T(1));
    std::array<T, kPatchValues> w;
    for (std::size_t j = 0; j < input.candidates.size(); ++j) {
        expand_scores(input.scores.data() + j * kNumGroups, w.data());
        weighted_accumulate(w.data(), input.candidates[j].data(), acc.data(), wsum.data());
    }
}

}  // namespace

template <class T>
void AggregationInput<T>::validate() const {
    SBM_REQUIRE(reference.size() == static_cast<std::size_t>(kPatchValues), "aggregate: reference must have 192 coefficients");
    SBM_REQUIRE(scores.size() == candidates.size() * kNumGroups,
                "aggregate: need exactly 30 scores per candidate");
    for (const auto& c : candidates)
        SBM_REQUIRE(c.size() == static_cast<std::size_t>(kPatchValues), "aggregate: candidate must have 192 coefficients");
}

template <class T>
SubbandCoeffs<T> aggregate_coeffs(const AggregationInput<T>& input) {
    input.validate();
    std::array<T, kPatchValues> acc, wsum;
    weighted_sums(input, acc, wsum);
    SubbandCoeffs<T> out;
    for (int c = 0; c < kPatchValues; ++c) out.values[static_cast<std::size_t>(c)] = acc[static_cast<std::size_t>(c)] / wsum[static_cast<std::size_t>(c)];
    return out;
}

template <class T>
DenoisedPatch<T> aggregate(const AggregationInput<T>& input, const TransformSpec& spec) {
    DenoisedPatch<T> out;
    out.coeffs = aggregate_coeffs(input);
    synthesize<T>(out.coeffs.values, out.pixels, spec);
    return out;
}

template <class T>
FullLoss<T> loss_full(std::span<const T> clean, const AggregationInput<T>& input) {
    SBM_REQUIRE(clean.size() == static_cast<std::size_t>(kPatchValues), "loss_full: clean must have 192 coefficients");
    input.validate();
    std::array<T, kPatchValues> acc, wsum;
    weighted_sums(input, acc, wsum);
    FullLoss<T> out;
    std::array<T, kPatchValues> resid;  // r_hat - r
    for (int c = 0; c < kPatchValues; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        out.estimate.values[uc] = acc[uc] / wsum[uc];
        resid[uc] = out.estimate.values[uc] - clean[uc];
        out.loss += resid[uc] * resid[uc];
    }
    out.grad_scores.assign(input.candidates.size() * kNumGroups, T(0));
    const auto& table = group_table();
    for (std::size_t j = 0; j < input.candidates.size(); ++j) {
        const auto& cand = input.candidates[j];
        T* g = out.grad_scores.data() + j * kNumGroups;
        for (int gi = 0; gi < kNumGroups; ++gi) {
            const auto& info = table[static_cast<std::size_t>(gi)];
            T dot = T(0);
            for (int k = 0; k < info.size; ++k) {
                const auto c = static_cast<std::size_t>(info.offset + k);
                dot += resid[c] * (cand[c] - out.estimate.values[c]);
            }
            g[gi] = T(2) * dot / wsum[static_cast<std::size_t>(info.offset)];
        }
    }
    return out;
}

template <class T>
PairLoss<T> loss_pair(std::span<const T> clean, std::span<const T> reference, std::span<const T> candidate,
                      std::span<const T> scores) {
    SBM_REQUIRE(clean.size() == static_cast<std::size_t>(kPatchValues) &&
                    reference.size() == static_cast<std::size_t>(kPatchValues) &&
                    candidate.size() == static_cast<std::size_t>(kPatchValues),
                "loss_pair: coefficient vectors must have 192 entries");
    SBM_REQUIRE(scores.size() == static_cast<std::size_t>(kNumGroups), "loss_pair: need 30 scores");
    PairLoss<T> out;
    const auto& table = group_table();
    for (int gi = 0; gi < kNumGroups; ++gi) {
        const auto& info = table[static_cast<std::size_t>(gi)];
        T a = T(0), b = T(0);
        for (int k = 0; k < info.size; ++k) {
            const auto c = static_cast<std::size_t>(info.offset + k);
            const T di = reference[c] - clean[c], dj = candidate[c] - clean[c];
            a += di * di;
            b += dj * dj;
        }
        const T m = scores[static_cast<std::size_t>(gi)];
        const T q = T(1) + m;
        out.loss += (a + m * m * b) / (q * q);
        out.grad[static_cast<std::size_t>(gi)] = T(2) * (m * b - a) / (q * q * q);
    }
    return out;
}

Image match_average(const Image& noisy, int window_radius, const ScoreProvider& scores, int ref_batch) {
    SBM_REQUIRE(noisy.height >= kContextSize && noisy.width >= kContextSize,
                "denoise: image must be at least 16x16 (one context patch)");
    SBM_REQUIRE(window_radius >= 1, "denoise: window radius must be >= 1");
    SBM_REQUIRE(ref_batch >= 1, "denoise: ref_batch must be >= 1");
    const int rows = patch_positions(noisy.height), cols = patch_positions(noisy.width);
    const int total = rows * cols;

    std::vector<float> coeffs(static_cast<std::size_t>(total) * kPatchValues);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const auto patch = extract_patch(noisy, {r, c, kPatchSize});
            analyze<float>(patch, std::span<float>(coeffs).subspan(static_cast<std::size_t>(r * cols + c) * kPatchValues, kPatchValues));
        }
    }
    auto coeff_of = [&](int r, int c) {
        return std::span<const float>(coeffs).subspan(static_cast<std::size_t>(r * cols + c) * kPatchValues, kPatchValues);
    };

    PatchAccumulator out(noisy.height, noisy.width);
    std::vector<PatchRef> refs;
    std::vector<std::vector<PatchRef>> members;
    std::vector<float> score_buf;
    std::array<float, kPatchValues> pixels;
    for (int start = 0; start < total; start += ref_batch) {
        const int count = std::min(ref_batch, total - start);
        refs.clear();
        members.clear();
        std::size_t n_pairs = 0;
        for (int i = 0; i < count; ++i) {
            const int pos = start + i;
            refs.push_back({pos / cols, pos % cols, kPatchSize});
            members.push_back(window_members(noisy.height, noisy.width, pos / cols, pos % cols, window_radius));
            n_pairs += members.back().size();
        }
        score_buf.assign(n_pairs * kNumGroups, 0.0f);
        scores(refs, members, score_buf);
        std::size_t offset = 0;
        for (int i = 0; i < count; ++i) {
            const auto& ref = refs[static_cast<std::size_t>(i)];
            const auto& mem = members[static_cast<std::size_t>(i)];
            AggregationInput<float> in;
            in.reference = coeff_of(ref.row, ref.col);
            in.candidates.reserve(mem.size());
            for (const auto& m : mem) in.candidates.push_back(coeff_of(m.row, m.col));
            in.scores = std::span<const float>(score_buf).subspan(offset * kNumGroups, mem.size() * kNumGroups);
            offset += mem.size();
            const auto est = aggregate_coeffs(in);
            synthesize<float>(est.values, pixels);
            out.add(ref.row, ref.col, pixels);
        }
    }
    return out.finish();
}

Image denoise_stage1(const Image& noisy, const Matcher<float>& matcher, const Stage1Options& options) {
    SBM_REQUIRE(noisy.height >= kContextSize && noisy.width >= kContextSize,
                "denoise: image must be at least 16x16 (one context patch)");
    const ImageScorer scorer(noisy, matcher);
    return match_average(
        noisy, options.window_radius,
        [&](std::span<const PatchRef> refs, std::span<const std::vector<PatchRef>> members, std::span<float> out) {
            scorer.score_many(refs, members, out);
        },
        options.ref_batch);
}

#define SBM_INSTANTIATE_AGGREGATE(T)                                                                         \
    template struct AggregationInput<T>;                                                                     \
    template SubbandCoeffs<T> aggregate_coeffs<T>(const AggregationInput<T>&);                               \
    template DenoisedPatch<T> aggregate<T>(const AggregationInput<T>&, const TransformSpec&);                \
    template FullLoss<T> loss_full<T>(std::span<const T>, const AggregationInput<T>&);                       \
    template PairLoss<T> loss_pair<T>(std::span<const T>, std::span<const T>, std::span<const T>,           \
                                      std::span<const T>);

SBM_INSTANTIATE_AGGREGATE(float)
SBM_INSTANTIATE_AGGREGATE(double)

}  // namespace sbm
