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

#include <cmath>

#include "sbmatch/nn/param_store.hpp"
#include "sbmatch/simd/kernels.hpp"

namespace sbm::nn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One bias-corrected Adam update on every entry, then zeroes the gradients.
template <class T>
void adam_step(ParamStore<T>& params, double lr, const AdamConfig& cfg = {}) {
    for (auto& e : params.entries()) {
        ++e.step;
        const double t = static_cast<double>(e.step);
        const double c1 = 1.0 - std::pow(cfg.beta1, t);
        const double c2 = std::sqrt(1.0 - std::pow(cfg.beta2, t));
        // lr * m_hat / (sqrt(v_hat) + eps) == lr_t * m / (sqrt(v) + eps_t)
        const double lr_t = lr * c2 / c1;
        const double eps_t = cfg.epsilon * c2;
        if constexpr (std::is_same_v<T, float>) {
            simd::kernels().adam(e.size(), e.value.data(), e.grad.data(), e.moment1.data(), e.moment2.data(),
                                 static_cast<float>(cfg.beta1), static_cast<float>(cfg.beta2),
                                 static_cast<float>(lr_t), static_cast<float>(eps_t));
        } else {
            for (std::size_t i = 0; i < e.size(); ++i) {
                const T g = e.grad[i];
                e.moment1[i] = static_cast<T>(cfg.beta1) * e.moment1[i] + static_cast<T>(1.0 - cfg.beta1) * g;
                e.moment2[i] = static_cast<T>(cfg.beta2) * e.moment2[i] + static_cast<T>(1.0 - cfg.beta2) * g * g;
                e.value[i] -= static_cast<T>(lr_t) * e.moment1[i] / (std::sqrt(e.moment2[i]) + static_cast<T>(eps_t));
                e.grad[i] = T(0);
            }
        }
    }
}

}  // namespace sbm::nn
