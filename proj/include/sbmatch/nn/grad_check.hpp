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

// Finite-difference gradient checker (double precision).
//
// For each probed coordinate the analytic gradient is compared with the central
// difference (f(x+h) - f(x-h)) / 2h. Relative error is
//   |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
// A probe whose central differences at h and h/2 disagree by more than
// kink_tolerance sits on a non-differentiable point (a ReLU crossing) and is
// reported as skipped rather than counted.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sbmatch/nn/param_store.hpp"

namespace sbm::nn {

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    double abs_floor = 1e-7;
    double kink_tolerance = 1e-3;
    std::size_t max_probes_per_entry = 0;  // 0 = every coordinate
    std::uint64_t seed = 7;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t probes = 0;
    std::size_t skipped = 0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool passed = true;

    const GradCheckEntry* find(const std::string& name) const;
    std::string summary() const;
};

// loss:     evaluates the scalar objective at the current parameter values.
// backprop: zeroes nothing itself; must accumulate d(loss)/d(params) into grads.
GradCheckReport grad_check(const std::function<double(const ParamStore<double>&)>& loss,
                           const std::function<void(ParamStore<double>&)>& backprop,
                           ParamStore<double>& params, const GradCheckOptions& options = {});

}  // namespace sbm::nn
