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

// Matcher training schedules.
//
// pretrain_match: each step samples images, adds noise, takes every
// non-overlapping 8x8 patch of a random crop, pairs each patch with a shuffled
// partner from the same image and descends the single-candidate loss for both
// orderings of every pair.
//
// finetune_match: each step samples images, a block of reference positions in
// each, scores every candidate of each reference's search window and descends
// the full aggregation loss. The learning rate drops by 10^-0.5 at each
// schedule milestone.
//
// Both losses are averaged over the terms of a step and over the 192
// coefficients of a patch.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sbmatch/harness/config.hpp"
#include "sbmatch/image.hpp"
#include "sbmatch/matcher.hpp"

namespace sbm {

struct TrainLog {
    std::vector<double> loss;    // per step
    std::vector<double> lr;      // per step
    std::vector<double> sigmas;  // noise level drawn for every sampled image
    double seconds = 0.0;
    int best_step = -1;          // set when validation selection ran
    double best_score = 0.0;
};

// Returns a validation score (higher is better), e.g. mean stage-1 PSNR.
using ValidationFn = std::function<double(const Matcher<float>&)>;

TrainLog pretrain_match(std::span<const Image> corpus, const DenoiseConfig& config, const TrainSchedule& schedule,
                        Matcher<float>& matcher, std::uint64_t seed);

// With schedule.select_on_val and a validation function, evaluates every
// val_every steps (and at the end) and restores the best parameters.
TrainLog finetune_match(std::span<const Image> corpus, const DenoiseConfig& config, const TrainSchedule& schedule,
                        Matcher<float>& matcher, std::uint64_t seed, const ValidationFn& validate = {});

}  // namespace sbm
