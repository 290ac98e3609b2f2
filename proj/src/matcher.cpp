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

#include "sbmatch/matcher.hpp"

#include <algorithm>
#include <random>

namespace sbm {
namespace {

using nn::LayerKind;
using nn::LayerSpec;
using nn::Padding;

LayerSpec conv(std::string tag, int in, int out, int stride = 1, Padding pad = Padding::same_zero,
               std::vector<std::string> src = {}) {
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.tag = std::move(tag);
    l.in_channels = in;
    l.out_channels = out;
    l.stride = stride;
    l.padding = pad;
    l.sources = std::move(src);
    return l;
}

LayerSpec simple(LayerKind kind, std::string tag, std::vector<std::string> src = {}) {
    LayerSpec l;
    l.kind = kind;
    l.tag = std::move(tag);
    l.sources = std::move(src);
    return l;
}

LayerSpec fc(std::string tag, int in, int out) {
    LayerSpec l;
    l.kind = LayerKind::fully_connected;
    l.tag = std::move(tag);
    l.in_channels = in;
    l.out_channels = out;
    return l;
}

const LayerSpec& find_layer(const nn::NetworkSpec& net, const std::string& tag) {
    for (const auto& l : net.layers)
        if (l.tag == tag) return l;
    throw FormatError("matcher manifest: network '" + net.name + "' lacks layer '" + tag + "'");
}

// Runs shape inference to confirm the feature stack collapses 16x16 to 1x1.
void check_feature_geometry(const nn::NetworkSpec& net) {
    const auto srcs = net.source_indices();
    std::vector<std::array<int, 3>> shapes(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        auto in_shape = [&](int s) { return s < 0 ? std::array<int, 3>{net.in_channels, kContextSize, kContextSize}
                                                  : shapes[static_cast<std::size_t>(s)]; };
        auto s0 = in_shape(srcs[i][0]);
        if (l.kind == LayerKind::conv2d) {
            if (s0[0] != l.in_channels) throw FormatError("matcher manifest: channel mismatch at '" + l.tag + "'");
            s0 = {l.out_channels, nn::conv_output_size(l, s0[1]), nn::conv_output_size(l, s0[2])};
            if (s0[1] <= 0 || s0[2] <= 0) throw FormatError("matcher manifest: '" + l.tag + "' collapses input");
        } else if (l.kind == LayerKind::concat) {
            int c = 0;
            for (int s : srcs[i]) {
                const auto si = in_shape(s);
                if (si[1] != s0[1] || si[2] != s0[2])
                    throw FormatError("matcher manifest: concat '" + l.tag + "' joins different resolutions");
                c += si[0];
            }
            s0[0] = c;
        } else if (l.kind == LayerKind::fully_connected) {
            throw FormatError("matcher manifest: feature stack may not contain fc layers");
        }
        shapes[i] = s0;
    }
    const auto out = shapes[static_cast<std::size_t>(net.output_index())];
    if (out[1] != 1 || out[2] != 1) throw FormatError("matcher manifest: feature output is not 1x1");
}

}  // namespace

MatcherArch MatcherArch::build(const MatcherWidths& w) {
    SBM_REQUIRE(w.stage1 > 0 && w.stage2 > 0 && w.stage3 > 0 && w.feature_dim > 0 && w.hidden > 0,
                "MatcherArch: widths must be positive");
    MatcherArch arch;
    arch.widths = w;
    auto& f = arch.feature;
    f.name = "feature";
    f.in_channels = kChannels;
    f.in_height = kContextSize;
    f.in_width = kContextSize;
    f.input_scale = kMatcherInputScale;
    auto add_conv = [&](int idx, int in, int out, int stride = 1, Padding pad = Padding::same_zero,
                        std::vector<std::string> src = {}) {
        const std::string n = std::to_string(idx);
        f.layers.push_back(conv("f" + n, in, out, stride, pad, std::move(src)));
        f.layers.push_back(simple(LayerKind::relu, "r" + n));
    };
    add_conv(1, kChannels, w.stage1);
    add_conv(2, w.stage1, w.stage1);
    add_conv(3, w.stage1, w.stage1);
    f.layers.push_back(simple(LayerKind::concat, "j1", {"r1", "r3"}));
    add_conv(4, 2 * w.stage1, w.stage2, 2);
    add_conv(5, w.stage2, w.stage2);
    add_conv(6, w.stage2, w.stage2);
    add_conv(7, w.stage2, w.stage2);
    f.layers.push_back(simple(LayerKind::concat, "j2", {"r4", "r7"}));
    add_conv(8, 2 * w.stage2, w.stage3, 2);
    add_conv(9, w.stage3, w.stage3);
    add_conv(10, w.stage3, w.stage3);
    add_conv(11, w.stage3, w.stage3, 1, Padding::valid);
    add_conv(12, w.stage3, w.stage3, 2);
    add_conv(13, w.stage3, w.stage3);
    add_conv(14, w.stage3, w.feature_dim);

    auto& c = arch.compare;
    c.name = "compare";
    c.in_channels = 2 * w.feature_dim;
    c.in_height = 1;
    c.in_width = 1;
    c.layers.push_back(fc("c1", 2 * w.feature_dim, w.hidden));
    c.layers.push_back(simple(LayerKind::relu, "q1"));
    for (int i = 2; i <= 4; ++i) {
        c.layers.push_back(fc("c" + std::to_string(i), w.hidden, w.hidden));
        c.layers.push_back(simple(LayerKind::relu, "q" + std::to_string(i)));
    }
    c.layers.push_back(fc("c5", w.hidden, kNumGroups));
    c.layers.push_back(simple(LayerKind::sigmoid, "score"));
    f.validate();
    c.validate();
    return arch;
}

std::string MatcherArch::manifest() const { return nn::to_manifest({feature, compare}); }

MatcherArch MatcherArch::from_manifest(std::string_view manifest) {
    auto nets = nn::parse_manifest(manifest);
    if (nets.size() != 2 || nets[0].name != "feature" || nets[1].name != "compare")
        throw FormatError("matcher manifest: expected networks 'feature' and 'compare'");
    MatcherArch arch;
    arch.feature = std::move(nets[0]);
    arch.compare = std::move(nets[1]);
    int n_conv = 0;
    for (const auto& l : arch.feature.layers) n_conv += l.kind == LayerKind::conv2d;
    if (n_conv != 14) throw FormatError("matcher manifest: feature stack must have 14 conv layers");
    check_feature_geometry(arch.feature);
    const auto& last_fc = find_layer(arch.compare, "c5");
    if (last_fc.out_channels != kNumGroups) throw FormatError("matcher manifest: comparison must output 30 scores");
    if (arch.compare.layers.back().kind != LayerKind::sigmoid)
        throw FormatError("matcher manifest: comparison must end in a sigmoid");
    arch.widths.stage1 = find_layer(arch.feature, "f1").out_channels;
    arch.widths.stage2 = find_layer(arch.feature, "f4").out_channels;
    arch.widths.stage3 = find_layer(arch.feature, "f8").out_channels;
    arch.widths.feature_dim = find_layer(arch.feature, "f14").out_channels;
    arch.widths.hidden = find_layer(arch.compare, "c1").out_channels;
    if (arch.compare.in_channels != 2 * arch.widths.feature_dim)
        throw FormatError("matcher manifest: comparison input must be twice the feature width");
    return arch;
}

template <class T>
Matcher<T> Matcher<T>::init(const MatcherArch& arch, std::uint64_t seed) {
    Matcher<T> m;
    m.arch = arch;
    std::mt19937_64 rng(seed);
    nn::init_network_params(arch.feature, m.params, rng);
    nn::init_network_params(arch.compare, m.params, rng);
    return m;
}

template <class T>
nn::Tensor<T> Matcher<T>::features(const nn::Tensor<T>& contexts, nn::Trace<T>* trace) const {
    SBM_REQUIRE(contexts.c == kChannels && contexts.h == kContextSize && contexts.w == kContextSize,
                "Matcher::features: contexts must be [N, 3, 16, 16]");
    auto out = nn::network_forward(arch.feature, contexts, params, trace);
    out.rank = 2;
    return out;
}

template <class T>
nn::Tensor<T> Matcher<T>::compare(const nn::Tensor<T>& features, std::span<const std::pair<int, int>> pairs,
                                  nn::Trace<T>* trace) const {
    const int d = arch.feature_dim();
    SBM_REQUIRE(features.item_size() == static_cast<std::size_t>(d), "Matcher::compare: feature width mismatch");
    auto x = nn::Tensor<T>::matrix(static_cast<int>(pairs.size()), 2 * d);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [a, b] = pairs[p];
        SBM_REQUIRE(a >= 0 && b >= 0 && a < features.n && b < features.n, "Matcher::compare: pair index out of range");
        T* row = x.item(static_cast<int>(p));
        std::copy_n(features.item(a), d, row);
        std::copy_n(features.item(b), d, row + d);
    }
    return nn::network_forward(arch.compare, x, params, trace);
}

template <class T>
void context_to_chw(std::span<const float> raster, T* dst) {
    SBM_REQUIRE(raster.size() == static_cast<std::size_t>(kContextValues), "context must be 16x16x3");
    constexpr int plane = kContextSize * kContextSize;
    for (int px = 0; px < plane; ++px)
        for (int ch = 0; ch < kChannels; ++ch)
            dst[ch * plane + px] = static_cast<T>(raster[static_cast<std::size_t>(px * kChannels + ch)]);
}

template <class T>
nn::Tensor<T> contexts_tensor(std::span<const std::vector<float>> rasters) {
    nn::Tensor<T> t(static_cast<int>(rasters.size()), kChannels, kContextSize, kContextSize);
    for (std::size_t i = 0; i < rasters.size(); ++i) context_to_chw<T>(rasters[i], t.item(static_cast<int>(i)));
    return t;
}

template <class T>
std::vector<T> extract_features(std::span<const float> context, const Matcher<T>& matcher) {
    nn::Tensor<T> t(1, kChannels, kContextSize, kContextSize);
    context_to_chw<T>(context, t.item(0));
    auto f = matcher.features(t);
    return f.data;
}

template <class T>
ScoreVector<T> score_pair(std::span<const T> feat_i, std::span<const T> feat_j, const Matcher<T>& matcher) {
    const auto d = static_cast<std::size_t>(matcher.arch.feature_dim());
    SBM_REQUIRE(feat_i.size() == d && feat_j.size() == d, "score_pair: feature width mismatch");
    auto feats = nn::Tensor<T>::matrix(2, static_cast<int>(d));
    std::copy(feat_i.begin(), feat_i.end(), feats.item(0));
    std::copy(feat_j.begin(), feat_j.end(), feats.item(1));
    const std::pair<int, int> pair{0, 1};
    auto s = matcher.compare(feats, std::span(&pair, 1));
    ScoreVector<T> out;
    std::copy_n(s.data.begin(), kNumGroups, out.begin());
    return out;
}

template <class T>
const nn::Tensor<T>& MatcherPass<T>::forward(const Matcher<T>& matcher, const nn::Tensor<T>& contexts,
                                             std::vector<std::pair<int, int>> pairs) {
    pairs_ = std::move(pairs);
    features_ = matcher.features(contexts, &feature_trace_);
    scores_ = matcher.compare(features_, pairs_, &compare_trace_);
    return scores_;
}

template <class T>
void MatcherPass<T>::backward(Matcher<T>& matcher, const nn::Tensor<T>& grad_scores) {
    SBM_REQUIRE(grad_scores.same_shape(scores_), "MatcherPass::backward: gradient shape mismatch");
    const auto dx = nn::network_backward(matcher.arch.compare, grad_scores, compare_trace_, matcher.params);
    const int d = matcher.arch.feature_dim();
    nn::Tensor<T> dfeat(features_.n, d, 1, 1);
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
        const auto [a, b] = pairs_[p];
        const T* row = dx.item(static_cast<int>(p));
        T* fa = dfeat.item(a);
        T* fb = dfeat.item(b);
        for (int k = 0; k < d; ++k) {
            fa[k] += row[k];
            fb[k] += row[d + k];
        }
    }
    nn::network_backward(matcher.arch.feature, dfeat, feature_trace_, matcher.params);
}

ImageScorer::ImageScorer(const Image& noisy, const Matcher<float>& matcher, int batch) : matcher_(matcher) {
    SBM_REQUIRE(noisy.height >= kPatchSize && noisy.width >= kPatchSize, "ImageScorer: image smaller than a patch");
    SBM_REQUIRE(batch > 0, "ImageScorer: batch must be positive");
    rows_ = patch_positions(noisy.height);
    cols_ = patch_positions(noisy.width);
    const int total = rows_ * cols_;
    const int d = matcher.arch.feature_dim();
    features_ = nn::Tensor<float>::matrix(total, d);
    const Image padded = reflect_pad(noisy, kContextPad);
    std::vector<float> raster(kContextValues);
    for (int start = 0; start < total; start += batch) {
        const int count = std::min(batch, total - start);
        nn::Tensor<float> ctx(count, kChannels, kContextSize, kContextSize);
        for (int i = 0; i < count; ++i) {
            const int pos = start + i;
            extract_context(padded, pos / cols_, pos % cols_, raster);
            context_to_chw<float>(raster, ctx.item(i));
        }
        const auto f = matcher.features(ctx);
        std::copy(f.data.begin(), f.data.end(), features_.item(start));
    }
}

std::span<const float> ImageScorer::feature(int row, int col) const {
    SBM_REQUIRE(row >= 0 && row < rows_ && col >= 0 && col < cols_, "ImageScorer: position out of range");
    return {features_.item(index(row, col)), static_cast<std::size_t>(matcher_.arch.feature_dim())};
}

void ImageScorer::score(const PatchRef& ref, std::span<const PatchRef> members, std::span<float> out) const {
    const std::vector<PatchRef> one(members.begin(), members.end());
    score_many(std::span(&ref, 1), std::span(&one, 1), out);
}

void ImageScorer::score_many(std::span<const PatchRef> refs, std::span<const std::vector<PatchRef>> members,
                             std::span<float> out) const {
    SBM_REQUIRE(refs.size() == members.size(), "ImageScorer: refs/members length mismatch");
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t r = 0; r < refs.size(); ++r) {
        const int a = index(refs[r].row, refs[r].col);
        for (const auto& m : members[r]) pairs.emplace_back(a, index(m.row, m.col));
    }
    SBM_REQUIRE(out.size() == pairs.size() * kNumGroups, "ImageScorer: output size mismatch");
    if (pairs.empty()) return;
    const auto s = matcher_.compare(features_, pairs);
    std::copy(s.data.begin(), s.data.end(), out.begin());
}

ScoreMap score_image(const Image& noisy, std::span<const SearchWindow> windows, const Matcher<float>& matcher) {
    ImageScorer scorer(noisy, matcher);
    ScoreMap map;
    map.scores.resize(windows.size());
    std::vector<float> buf;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& win = windows[w];
        buf.assign(win.members.size() * kNumGroups, 0.0f);
        scorer.score(win.center, win.members, buf);
        auto& dst = map.scores[w];
        dst.resize(win.members.size());
        for (std::size_t j = 0; j < win.members.size(); ++j)
            std::copy_n(buf.begin() + static_cast<std::ptrdiff_t>(j * kNumGroups), kNumGroups, dst[j].begin());
    }
    return map;
}

#define SBM_INSTANTIATE_MATCHER(T)                                                                          \
    template struct Matcher<T>;                                                                             \
    template class MatcherPass<T>;                                                                          \
    template void context_to_chw<T>(std::span<const float>, T*);                                            \
    template nn::Tensor<T> contexts_tensor<T>(std::span<const std::vector<float>>);                         \
    template std::vector<T> extract_features<T>(std::span<const float>, const Matcher<T>&);                 \
    template ScoreVector<T> score_pair<T>(std::span<const T>, std::span<const T>, const Matcher<T>&);

SBM_INSTANTIATE_MATCHER(float)
SBM_INSTANTIATE_MATCHER(double)

}  // namespace sbm
