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

#include <array>
#include <cstddef>
#include <vector>

#include "sbmatch/error.hpp"

namespace sbm::nn {

// Batch-major NCHW tensor. Rank-2 tensors (batch, features) are stored with
// h = w = 1 so fully-connected layers can consume flattened conv output.
template <class T>
struct Tensor {
    int n = 0, c = 0, h = 1, w = 1;
    int rank = 4;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_), rank(4),
          data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    static Tensor matrix(int rows, int cols, T fill = T(0)) {
        Tensor t(rows, cols, 1, 1, fill);
        t.rank = 2;
        return t;
    }

    std::array<int, 4> shape() const { return {n, c, h, w}; }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t item_size() const { return static_cast<std::size_t>(c) * h * w; }
    std::size_t size() const { return data.size(); }
    T* item(int b) { return data.data() + static_cast<std::size_t>(b) * item_size(); }
    const T* item(int b) const { return data.data() + static_cast<std::size_t>(b) * item_size(); }
    bool same_shape(const Tensor& o) const { return shape() == o.shape(); }
};

template <class U, class T>
Tensor<U> tensor_cast(const Tensor<T>& t) {
    Tensor<U> out;
    out.n = t.n;
    out.c = t.c;
    out.h = t.h;
    out.w = t.w;
    out.rank = t.rank;
    out.data.assign(t.data.begin(), t.data.end());
    return out;
}

}  // namespace sbm::nn
