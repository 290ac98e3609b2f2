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

#include "sbmatch/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace sbm::nn {

const GradCheckEntry* GradCheckReport::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    for (const auto& e : entries) {
        os << (e.passed ? "ok   " : "FAIL ") << e.name << " max_rel=" << e.max_rel_error << " probes=" << e.probes
           << " skipped=" << e.skipped;
        if (e.probes > 0)
            os << " worst[" << e.worst_index << "] analytic=" << e.worst_analytic << " numeric=" << e.worst_numeric;
        os << "\n";
    }
    return os.str();
}

GradCheckReport grad_check(const std::function<double(const ParamStore<double>&)>& loss,
                           const std::function<void(ParamStore<double>&)>& backprop,
                           ParamStore<double>& params, const GradCheckOptions& options) {
    params.zero_grad();
    backprop(params);
    std::mt19937_64 rng(options.seed);
    GradCheckReport report;
    const double h = options.step;
    for (auto& entry : params.entries()) {
        GradCheckEntry res;
        res.name = entry.name;
        std::vector<std::size_t> idx(entry.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (options.max_probes_per_entry > 0 && idx.size() > options.max_probes_per_entry) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(options.max_probes_per_entry);
            std::sort(idx.begin(), idx.end());
        }
        for (std::size_t i : idx) {
            double& x = entry.value[i];
            const double x0 = x;
            auto central = [&](double step) {
                x = x0 + step;
                const double fp = loss(params);
                x = x0 - step;
                const double fm = loss(params);
                x = x0;
                return (fp - fm) / (2.0 * step);
            };
            const double numeric = central(h);
            const double analytic = entry.grad[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
            double rel = std::abs(analytic - numeric) / denom;
            if (rel > options.tolerance) {
                const double numeric_half = central(h / 2);
                const double d2 = std::max({std::abs(numeric), std::abs(numeric_half), options.abs_floor});
                if (std::abs(numeric - numeric_half) / d2 > options.kink_tolerance) {
                    ++res.skipped;
                    continue;
                }
            }
            ++res.probes;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_index = i;
                res.worst_analytic = analytic;
                res.worst_numeric = numeric;
            }
        }
        res.passed = res.max_rel_error < options.tolerance;
        report.max_rel_error = std::max(report.max_rel_error, res.max_rel_error);
        report.passed = report.passed && res.passed;
        report.entries.push_back(std::move(res));
    }
    return report;
}

}  // namespace sbm::nn
