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

// Residual regression network applied after match-averaging. Seven 3x3
// convolutions with dilations 1,2,3,4,3,2,1 and same-zero padding, ReLU after
// the first six, read concat(noisy, stage1) (6 channels, scaled by 1/128) and
// predict a residual in the same scaled units:
//
//   output = stage1 + net(concat(noisy, stage1)) * 128
//
// The last layer starts at zero so an untrained refiner is the identity on
// stage1.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sbmatch/image.hpp"
#include "sbmatch/nn/network.hpp"

namespace sbm {

inline constexpr int kRefineLayers = 7;
inline constexpr int kRefineDilations[kRefineLayers] = {1, 2, 3, 4, 3, 2, 1};
inline constexpr double kRefineInputScale = 1.0 / 128.0;

struct RefineArch {
    int width = 32;
    nn::NetworkSpec net;

    static RefineArch build(int width = 32);
    static RefineArch from_manifest(std::string_view manifest);
    std::string manifest() const { return nn::to_manifest({net}); }
};

template <class T>
struct Refiner {
    RefineArch arch;
    nn::ParamStore<T> params;

    static Refiner init(const RefineArch& arch, std::uint64_t seed);
};

// Packs (noisy, stage1) images into a [1, 6, H, W] tensor.
template <class T>
nn::Tensor<T> refine_input(const Image& noisy, const Image& stage1);

template <class T>
Image refine_forward(const Image& noisy, const Image& stage1, const Refiner<T>& refiner);

struct RefineSample {
    Image clean;
    Image noisy;
    Image stage1;
};

struct RefineSchedule {
    int steps = 3000;
    double lr = 1e-3;
    int crop = 48;       // square training crop; <= 0 uses whole images
    int batch = 2;       // crops per step
    std::vector<int> lr_drop_steps;  // each multiplies lr by 10^-0.5
    std::uint64_t seed = 1;
};

// Per-step loss trace of train_refine.
struct RefineTrainLog {
    std::vector<double> loss;  // mean squared error in gray levels^2
};

// Adam on the mean squared error between refine output and clean.
RefineTrainLog train_refine(std::span<const RefineSample> dataset, Refiner<float>& refiner,
                            const RefineSchedule& schedule);

// Mean squared error loss and its parameter gradient on one sample (used by
// the training loop and the gradient oracle).
template <class T>
double refine_loss_and_grad(const nn::Tensor<T>& input, const nn::Tensor<T>& clean_chw, Refiner<T>& refiner,
                            bool accumulate_grad);

}  // namespace sbm
