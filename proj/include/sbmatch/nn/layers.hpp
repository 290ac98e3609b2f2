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

// The five layer primitives and their exact backward rules.
//
// conv2d is a 3x3 cross-correlation over NCHW input with stride 1 or 2,
// dilation >= 1 and either valid or same-zero padding (pad = dilation).
// Parameter names are "<tag>.weight" ([out, in, 3, 3] or [out, in]) and
// "<tag>.bias" ([out]). Backward ACCUMULATES into ParamStore gradients.

#include <array>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sbmatch/nn/param_store.hpp"
#include "sbmatch/nn/tensor.hpp"

namespace sbm::nn {

enum class LayerKind { conv2d, fully_connected, relu, sigmoid, concat };
enum class Padding { valid, same_zero };

inline constexpr int kKernel = 3;

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::string tag;
    std::vector<std::string> sources;  // empty = previous layer ("input" for the first)
    int in_channels = 0;
    int out_channels = 0;
    int stride = 1;
    int dilation = 1;
    Padding padding = Padding::same_zero;
    bool zero_init = false;

    std::string weight_name() const { return tag + ".weight"; }
    std::string bias_name() const { return tag + ".bias"; }
    bool has_params() const { return kind == LayerKind::conv2d || kind == LayerKind::fully_connected; }
    int pad() const { return padding == Padding::same_zero ? dilation : 0; }

    // Throws ContractError for invalid attribute combinations.
    void validate() const;
};

std::string_view kind_name(LayerKind kind);

// Spatial output size of a conv layer along one dimension.
int conv_output_size(const LayerSpec& spec, int in);

// Saved state of one forward call, sufficient for backward without recompute.
template <class T>
struct LayerContext {
    std::string tag;
    std::vector<std::array<int, 4>> input_shapes;
    std::array<int, 4> output_shape{};
    int output_rank = 4;
    std::vector<T> saved;  // conv: im2col matrix; fc: input; relu/sigmoid: output
};

// He-normal weights N(0, 2/fan_in) and zero biases, or all zeros when zero_init.
template <class T>
void init_layer_params(const LayerSpec& spec, ParamStore<T>& params, std::mt19937_64& rng);

template <class T>
Tensor<T> layer_forward(const LayerSpec& spec, std::span<const Tensor<T>* const> inputs,
                        const ParamStore<T>& params, LayerContext<T>* ctx);

// Returns one gradient per input; parameter gradients are added to params.
template <class T>
std::vector<Tensor<T>> layer_backward(const LayerSpec& spec, const Tensor<T>& grad_out,
                                      const LayerContext<T>& ctx, ParamStore<T>& params);

}  // namespace sbm::nn
