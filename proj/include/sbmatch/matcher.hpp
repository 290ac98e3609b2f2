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

// Siamese matching network. A convolutional feature stack maps a 16x16x3 noisy
// context to a D-vector; a fully-connected comparison stack maps the
// concatenation (feat_i, feat_j) to 30 sigmoid scores, one per coefficient
// group in canonical transform order. Scores are not symmetric in (i, j).
//
// Feature stack (14 conv layers, ReLU after each, 3x3 kernels):
//   16x16: f1 3->w1, f2, f3 (w1)           j1 = concat(f1, f3)
//    8x8:  f4 2w1->w2 stride 2, f5..f7     j2 = concat(f4, f7)
//    4x4:  f8 2w2->w3 stride 2, f9, f10
//    2x2:  f11 valid
//    1x1:  f12 stride 2, f13, f14 w3->D
// Comparison stack: 2D -> F -> F -> F -> F -> 30, ReLU between, sigmoid last.
// Inputs are raw intensities multiplied by a fixed input scale of 1/128.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sbmatch/image.hpp"
#include "sbmatch/nn/network.hpp"
#include "sbmatch/transform.hpp"

namespace sbm {

template <class T>
using ScoreVector = std::array<T, kNumGroups>;

struct MatcherWidths {
    int stage1 = 8;
    int stage2 = 16;
    int stage3 = 32;
    int feature_dim = 32;
    int hidden = 64;
};

struct MatcherArch {
    MatcherWidths widths;
    nn::NetworkSpec feature;
    nn::NetworkSpec compare;

    static MatcherArch build(const MatcherWidths& widths = {});
    static MatcherArch from_manifest(std::string_view manifest);
    std::string manifest() const;
    int feature_dim() const { return widths.feature_dim; }
};

inline constexpr double kMatcherInputScale = 1.0 / 128.0;

template <class T>
struct Matcher {
    MatcherArch arch;
    nn::ParamStore<T> params;

    // He-normal weights, zero biases, deterministic in seed.
    static Matcher init(const MatcherArch& arch, std::uint64_t seed);

    // contexts: [N, 3, 16, 16]. Returns [N, D].
    nn::Tensor<T> features(const nn::Tensor<T>& contexts, nn::Trace<T>* trace = nullptr) const;

    // Gathers (feat[a], feat[b]) rows and runs the comparison stack. Returns [P, 30].
    nn::Tensor<T> compare(const nn::Tensor<T>& features, std::span<const std::pair<int, int>> pairs,
                          nn::Trace<T>* trace = nullptr) const;
};

// Converts an image-layout 16x16x3 raster to CHW planes at dst (768 values).
template <class T>
void context_to_chw(std::span<const float> raster, T* dst);

// Stacks raw context rasters into a [N, 3, 16, 16] tensor.
template <class T>
nn::Tensor<T> contexts_tensor(std::span<const std::vector<float>> rasters);

template <class T>
std::vector<T> extract_features(std::span<const float> context, const Matcher<T>& matcher);

template <class T>
ScoreVector<T> score_pair(std::span<const T> feat_i, std::span<const T> feat_j, const Matcher<T>& matcher);

// One forward/backward pass over a batch of contexts and ordered pairs.
template <class T>
class MatcherPass {
public:
    // Runs features and comparison with traces kept for backward.
    const nn::Tensor<T>& forward(const Matcher<T>& matcher, const nn::Tensor<T>& contexts,
                                 std::vector<std::pair<int, int>> pairs);
    const nn::Tensor<T>& scores() const { return scores_; }
    // Accumulates parameter gradients for d(loss)/d(scores) = grad_scores [P, 30].
    void backward(Matcher<T>& matcher, const nn::Tensor<T>& grad_scores);

private:
    nn::Trace<T> feature_trace_;
    nn::Trace<T> compare_trace_;
    nn::Tensor<T> features_;
    nn::Tensor<T> scores_;
    std::vector<std::pair<int, int>> pairs_;
};

// Features for every 8x8 position of an image, computed once and reused for
// all pairs. Position index = row * patch_positions(width) + col.
class ImageScorer {
public:
    ImageScorer(const Image& noisy, const Matcher<float>& matcher, int batch = 256);

    int positions_per_row() const { return cols_; }
    int index(int row, int col) const { return row * cols_ + col; }
    std::span<const float> feature(int row, int col) const;

    // Scores for (ref, member) pairs, written row-major into out[members.size() * 30].
    void score(const PatchRef& ref, std::span<const PatchRef> members, std::span<float> out) const;

    // Same for several references at once (one batched comparison pass).
    void score_many(std::span<const PatchRef> refs, std::span<const std::vector<PatchRef>> members,
                    std::span<float> out) const;

private:
    const Matcher<float>& matcher_;
    int rows_ = 0, cols_ = 0;
    nn::Tensor<float> features_;  // [positions, D]
};

// Scores of every (center, member) pair of every window, index-aligned with
// windows[w].members.
struct ScoreMap {
    std::vector<std::vector<ScoreVector<float>>> scores;
};

ScoreMap score_image(const Image& noisy, std::span<const SearchWindow> windows, const Matcher<float>& matcher);

}  // namespace sbm
