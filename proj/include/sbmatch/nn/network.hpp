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

// A network is an ordered list of tagged layers forming a DAG: each layer reads
// the outputs of earlier layers (or the network input) by tag. Forward keeps a
// Trace; backward walks the layers in reverse and accumulates gradients into
// every source, including skip connections.
//
// Architecture manifests are plain text:
//
//   sbmatch-manifest 1
//   network <name>
//   input <channels> <height> <width>       (0 = any size)
//   input_scale <float>
//   layer conv2d <tag> in=3 out=8 stride=1 dilation=1 pad=same [src=a] [init=zero]
//   layer fc <tag> in=64 out=30 [src=a]
//   layer relu|sigmoid <tag> [src=a]
//   layer concat <tag> src=a,b
//   output <tag>
//   end
//
// The manifest digest (FNV-1a 64 of the text) is stored in checkpoints.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sbmatch/nn/layers.hpp"

namespace sbm::nn {

struct NetworkSpec {
    std::string name;
    int in_channels = 0;
    int in_height = 0;  // 0 = fully convolutional, any size
    int in_width = 0;
    double input_scale = 1.0;
    std::vector<LayerSpec> layers;
    std::string output;  // tag of the output layer; empty = last layer

    // Resolves default sources and checks tags; throws ContractError.
    void validate() const;
    std::vector<std::vector<int>> source_indices() const;  // -1 = network input
    int output_index() const;
};

template <class T>
struct Trace {
    std::vector<Tensor<T>> outputs;
    std::vector<LayerContext<T>> contexts;
    std::array<int, 4> input_shape{};
};

template <class T>
void init_network_params(const NetworkSpec& net, ParamStore<T>& params, std::mt19937_64& rng);

template <class T>
Tensor<T> network_forward(const NetworkSpec& net, const Tensor<T>& input, const ParamStore<T>& params,
                          Trace<T>* trace = nullptr);

// Returns the gradient with respect to the (unscaled) network input.
template <class T>
Tensor<T> network_backward(const NetworkSpec& net, const Tensor<T>& grad_output, const Trace<T>& trace,
                           ParamStore<T>& params);

std::string to_manifest(const std::vector<NetworkSpec>& nets);
std::vector<NetworkSpec> parse_manifest(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);
inline std::uint64_t manifest_digest(std::string_view manifest) { return fnv1a64(manifest); }

}  // namespace sbm::nn
