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

#include "sbmatch/refine.hpp"

#include <algorithm>
#include <cmath>

#include "sbmatch/error.hpp"
#include "sbmatch/nn/adam.hpp"

namespace sbm {
namespace {

template <class T>
nn::Tensor<T> image_to_chw(const Image& img) {
    nn::Tensor<T> t(1, kChannels, img.height, img.width);
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (std::size_t px = 0; px < plane; ++px)
        for (int ch = 0; ch < kChannels; ++ch)
            t.data[static_cast<std::size_t>(ch) * plane + px] = static_cast<T>(img.data[px * kChannels + ch]);
    return t;
}

template <class T>
void crop_into(const nn::Tensor<T>& src, int item, int r0, int c0, int size, nn::Tensor<T>& dst, int dst_item) {
    for (int ch = 0; ch < src.c; ++ch)
        for (int r = 0; r < size; ++r)
            std::copy_n(src.item(item) + (static_cast<std::size_t>(ch) * src.h + r0 + r) * src.w + c0, size,
                        dst.item(dst_item) + (static_cast<std::size_t>(ch) * size + r) * size);
}

}  // namespace

RefineArch RefineArch::build(int width) {
    SBM_REQUIRE(width > 0, "RefineArch: width must be positive");
    RefineArch arch;
    arch.width = width;
    auto& net = arch.net;
    net.name = "refine";
    net.in_channels = 2 * kChannels;
    net.input_scale = kRefineInputScale;
    for (int i = 0; i < kRefineLayers; ++i) {
        nn::LayerSpec l;
        l.kind = nn::LayerKind::conv2d;
        l.tag = "d" + std::to_string(i + 1);
        l.in_channels = i == 0 ? 2 * kChannels : width;
        l.out_channels = i == kRefineLayers - 1 ? kChannels : width;
        l.dilation = kRefineDilations[i];
        l.padding = nn::Padding::same_zero;
        l.zero_init = i == kRefineLayers - 1;
        net.layers.push_back(l);
        if (i < kRefineLayers - 1) {
            nn::LayerSpec r;
            r.kind = nn::LayerKind::relu;
            r.tag = "a" + std::to_string(i + 1);
            net.layers.push_back(r);
        }
    }
    net.validate();
    return arch;
}

RefineArch RefineArch::from_manifest(std::string_view manifest) {
    auto nets = nn::parse_manifest(manifest);
    if (nets.size() != 1 || nets[0].name != "refine") throw FormatError("refine manifest: expected network 'refine'");
    RefineArch arch;
    arch.net = std::move(nets[0]);
    std::vector<int> dilations;
    for (const auto& l : arch.net.layers) {
        if (l.kind != nn::LayerKind::conv2d) continue;
        dilations.push_back(l.dilation);
        if (l.padding != nn::Padding::same_zero || l.stride != 1)
            throw FormatError("refine manifest: layers must be stride-1 same-padded");
    }
    if (dilations != std::vector<int>(kRefineDilations, kRefineDilations + kRefineLayers))
        throw FormatError("refine manifest: dilation sequence must be 1,2,3,4,3,2,1");
    if (arch.net.in_channels != 2 * kChannels) throw FormatError("refine manifest: input must have 6 channels");
    arch.width = arch.net.layers.front().out_channels;
    return arch;
}

template <class T>
Refiner<T> Refiner<T>::init(const RefineArch& arch, std::uint64_t seed) {
    Refiner<T> r;
    r.arch = arch;
    std::mt19937_64 rng(seed);
    nn::init_network_params(arch.net, r.params, rng);
    return r;
}

template <class T>
nn::Tensor<T> refine_input(const Image& noisy, const Image& stage1) {
    SBM_REQUIRE(noisy.same_shape(stage1), "refine: noisy and stage-1 images differ in size");
    auto a = image_to_chw<T>(noisy);
    auto b = image_to_chw<T>(stage1);
    nn::Tensor<T> t(1, 2 * kChannels, noisy.height, noisy.width);
    std::copy(a.data.begin(), a.data.end(), t.data.begin());
    std::copy(b.data.begin(), b.data.end(), t.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return t;
}

template <class T>
Image refine_forward(const Image& noisy, const Image& stage1, const Refiner<T>& refiner) {
    const auto input = refine_input<T>(noisy, stage1);
    const auto residual = nn::network_forward(refiner.arch.net, input, refiner.params);
    Image out = stage1;
    const std::size_t plane = static_cast<std::size_t>(stage1.height) * stage1.width;
    const double out_scale = 1.0 / refiner.arch.net.input_scale;
    for (std::size_t px = 0; px < plane; ++px)
        for (int ch = 0; ch < kChannels; ++ch)
            out.data[px * kChannels + ch] +=
                static_cast<float>(residual.data[static_cast<std::size_t>(ch) * plane + px] * out_scale);
    return out;
}

template <class T>
double refine_loss_and_grad(const nn::Tensor<T>& input, const nn::Tensor<T>& clean_chw, Refiner<T>& refiner,
                            bool accumulate_grad) {
    SBM_REQUIRE(input.c == 2 * kChannels && clean_chw.c == kChannels && input.n == clean_chw.n &&
                    input.h == clean_chw.h && input.w == clean_chw.w,
                "refine loss: input/target shape mismatch");
    nn::Trace<T> trace;
    const auto residual = nn::network_forward(refiner.arch.net, input, refiner.params, accumulate_grad ? &trace : nullptr);
    const T out_scale = static_cast<T>(1.0 / refiner.arch.net.input_scale);
    const std::size_t item3 = clean_chw.item_size();
    const double count = static_cast<double>(clean_chw.size());
    nn::Tensor<T> grad(residual.n, residual.c, residual.h, residual.w);
    double loss = 0.0;
    for (int b = 0; b < input.n; ++b) {
        const T* stage1 = input.item(b) + item3;  // channels 3..5
        const T* res = residual.item(b);
        const T* clean = clean_chw.item(b);
        T* g = grad.item(b);
        for (std::size_t i = 0; i < item3; ++i) {
            const T diff = stage1[i] + res[i] * out_scale - clean[i];
            loss += static_cast<double>(diff) * static_cast<double>(diff);
            g[i] = static_cast<T>(2.0 / count) * diff * out_scale;
        }
    }
    if (accumulate_grad) nn::network_backward(refiner.arch.net, grad, trace, refiner.params);
    return loss / count;
}

RefineTrainLog train_refine(std::span<const RefineSample> dataset, Refiner<float>& refiner,
                            const RefineSchedule& schedule) {
    SBM_REQUIRE(!dataset.empty(), "train_refine: empty dataset");
    SBM_REQUIRE(schedule.batch >= 1, "train_refine: batch must be >= 1");
    std::vector<nn::Tensor<float>> inputs, targets;
    int min_side = 1 << 30;
    for (const auto& s : dataset) {
        SBM_REQUIRE(s.clean.same_shape(s.noisy) && s.clean.same_shape(s.stage1), "train_refine: sample size mismatch");
        inputs.push_back(refine_input<float>(s.noisy, s.stage1));
        targets.push_back(image_to_chw<float>(s.clean));
        min_side = std::min({min_side, s.clean.height, s.clean.width});
    }
    const int crop = schedule.crop > 0 ? std::min(schedule.crop, min_side) : 0;
    std::mt19937_64 rng(schedule.seed);
    RefineTrainLog log;
    double lr = schedule.lr;
    for (int step = 0; step < schedule.steps; ++step) {
        if (std::find(schedule.lr_drop_steps.begin(), schedule.lr_drop_steps.end(), step) != schedule.lr_drop_steps.end())
            lr *= std::pow(10.0, -0.5);
        double loss = 0.0;
        if (crop > 0) {
            nn::Tensor<float> in(schedule.batch, 2 * kChannels, crop, crop);
            nn::Tensor<float> tgt(schedule.batch, kChannels, crop, crop);
            for (int b = 0; b < schedule.batch; ++b) {
                const auto idx = std::uniform_int_distribution<std::size_t>(0, dataset.size() - 1)(rng);
                const auto& x = inputs[idx];
                const int r0 = std::uniform_int_distribution<int>(0, x.h - crop)(rng);
                const int c0 = std::uniform_int_distribution<int>(0, x.w - crop)(rng);
                crop_into(x, 0, r0, c0, crop, in, b);
                crop_into(targets[idx], 0, r0, c0, crop, tgt, b);
            }
            loss = refine_loss_and_grad(in, tgt, refiner, true);
        } else {
            for (int b = 0; b < schedule.batch; ++b) {
                const auto idx = std::uniform_int_distribution<std::size_t>(0, dataset.size() - 1)(rng);
                loss += refine_loss_and_grad(inputs[idx], targets[idx], refiner, true) / schedule.batch;
            }
            // Per-image gradients were each normalized by their own pixel count.
            for (auto& e : refiner.params.entries())
                for (auto& g : e.grad) g /= static_cast<float>(schedule.batch);
        }
        log.loss.push_back(loss);
        nn::adam_step(refiner.params, lr);
    }
    return log;
}

#define SBM_INSTANTIATE_REFINE(T)                                                                    \
    template struct Refiner<T>;                                                                      \
    template nn::Tensor<T> refine_input<T>(const Image&, const Image&);                              \
    template Image refine_forward<T>(const Image&, const Image&, const Refiner<T>&);                  \
    template double refine_loss_and_grad<T>(const nn::Tensor<T>&, const nn::Tensor<T>&, Refiner<T>&, bool);

SBM_INSTANTIATE_REFINE(float)
SBM_INSTANTIATE_REFINE(double)

}  // namespace sbm
