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

#include "sbmatch/harness/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <unordered_map>

#include "sbmatch/aggregate.hpp"
#include "sbmatch/error.hpp"
#include "sbmatch/nn/adam.hpp"
#include "sbmatch/transform.hpp"

namespace sbm {
namespace {

using Clock = std::chrono::steady_clock;

// Contexts and noisy/clean coefficients of the patches used in one step.
struct StepBatch {
    std::vector<float> contexts;  // CHW, kContextValues per patch
    std::vector<float> noisy;     // kPatchValues per patch
    std::vector<float> clean;     // kPatchValues per patch (references only are read)
    int count = 0;

    int add(const Image& padded, const Image& noisy_img, const Image& clean_img, int row, int col,
            std::vector<float>& raster) {
        contexts.resize(contexts.size() + kContextValues);
        extract_context(padded, row, col, raster);
        context_to_chw<float>(raster, contexts.data() + contexts.size() - kContextValues);
        for (auto* dst : {&noisy, &clean}) {
            const auto patch = extract_patch(dst == &noisy ? noisy_img : clean_img, {row, col, kPatchSize});
            dst->resize(dst->size() + kPatchValues);
            analyze<float>(patch, std::span<float>(*dst).last(kPatchValues));
        }
        return count++;
    }
    std::span<const float> s(int i) const {
        return std::span<const float>(noisy).subspan(static_cast<std::size_t>(i) * kPatchValues, kPatchValues);
    }
    std::span<const float> r(int i) const {
        return std::span<const float>(clean).subspan(static_cast<std::size_t>(i) * kPatchValues, kPatchValues);
    }
    nn::Tensor<float> tensor() const {
        nn::Tensor<float> t(count, kChannels, kContextSize, kContextSize);
        std::copy(contexts.begin(), contexts.end(), t.data.begin());
        return t;
    }
};

struct NoisySample {
    const Image* clean;
    Image noisy;
    Image padded;
};

NoisySample draw_sample(std::span<const Image> corpus, const DenoiseConfig& config, std::mt19937_64& rng,
                        TrainLog& log) {
    const auto idx = std::uniform_int_distribution<std::size_t>(0, corpus.size() - 1)(rng);
    const double sigma = config.draw_sigma(rng);
    log.sigmas.push_back(sigma);
    NoisySample s{&corpus[idx], add_noise(corpus[idx], {sigma, rng()}), {}};
    s.padded = reflect_pad(s.noisy, kContextPad);
    return s;
}

void require_corpus(std::span<const Image> corpus, const char* what) {
    if (corpus.empty()) throw ContractError(std::string(what) + ": corpus too small for one batch (empty)");
    for (const auto& img : corpus)
        if (img.height < kContextSize || img.width < kContextSize)
            throw ContractError(std::string(what) + ": corpus images must be at least 16x16");
}

}  // namespace

TrainLog pretrain_match(std::span<const Image> corpus, const DenoiseConfig& config, const TrainSchedule& schedule,
                        Matcher<float>& matcher, std::uint64_t seed) {
    require_corpus(corpus, "pretrain_match");
    config.validate();
    schedule.validate();
    const auto t0 = Clock::now();
    std::mt19937_64 rng(seed);
    TrainLog log;
    std::vector<float> raster(kContextValues);
    MatcherPass<float> pass;
    for (int step = 0; step < schedule.pretrain_steps; ++step) {
        StepBatch batch;
        std::vector<std::pair<int, int>> pairs;
        for (int b = 0; b < schedule.pretrain_images; ++b) {
            const auto sample = draw_sample(corpus, config, rng, log);
            const Image& clean = *sample.clean;
            const int ch = schedule.pretrain_crop > 0 ? std::min(schedule.pretrain_crop, clean.height) : clean.height;
            const int cw = schedule.pretrain_crop > 0 ? std::min(schedule.pretrain_crop, clean.width) : clean.width;
            const int r0 = std::uniform_int_distribution<int>(0, clean.height - ch)(rng);
            const int c0 = std::uniform_int_distribution<int>(0, clean.width - cw)(rng);
            std::vector<int> local;
            for (int r = r0; r + kPatchSize <= r0 + ch; r += kPatchSize)
                for (int c = c0; c + kPatchSize <= c0 + cw; c += kPatchSize)
                    local.push_back(batch.add(sample.padded, sample.noisy, clean, r, c, raster));
            std::vector<int> perm(local.size());
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            for (std::size_t i = 0; i < local.size(); ++i) {
                const auto j = static_cast<std::size_t>(perm[i]);
                if (j == i) continue;
                pairs.emplace_back(local[i], local[j]);
                pairs.emplace_back(local[j], local[i]);
            }
        }
        if (pairs.empty()) {
            log.loss.push_back(0.0);
            log.lr.push_back(schedule.lr);
            continue;
        }
        const auto& scores = pass.forward(matcher, batch.tensor(), pairs);
        auto grad = nn::Tensor<float>::matrix(static_cast<int>(pairs.size()), kNumGroups);
        const double norm = 1.0 / (static_cast<double>(pairs.size()) * kPatchValues);
        double loss = 0.0;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const auto [a, b] = pairs[p];
            const auto m = std::span<const float>(scores.item(static_cast<int>(p)), kNumGroups);
            const auto pl = loss_pair<float>(batch.r(a), batch.s(a), batch.s(b), m);
            loss += pl.loss * norm;
            for (int g = 0; g < kNumGroups; ++g)
                grad.item(static_cast<int>(p))[g] = static_cast<float>(pl.grad[static_cast<std::size_t>(g)] * norm);
        }
        pass.backward(matcher, grad);
        nn::adam_step(matcher.params, schedule.lr);
        log.loss.push_back(loss);
        log.lr.push_back(schedule.lr);
    }
    log.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return log;
}

TrainLog finetune_match(std::span<const Image> corpus, const DenoiseConfig& config, const TrainSchedule& schedule,
                        Matcher<float>& matcher, std::uint64_t seed, const ValidationFn& validate) {
    require_corpus(corpus, "finetune_match");
    config.validate();
    schedule.validate();
    const auto t0 = Clock::now();
    std::mt19937_64 rng(seed);
    TrainLog log;
    std::vector<float> raster(kContextValues);
    MatcherPass<float> pass;
    const bool selecting = schedule.select_on_val && validate;
    nn::ParamStore<float> best;
    auto check = [&](int step) {
        const double score = validate(matcher);
        if (log.best_step < 0 || score > log.best_score) {
            log.best_step = step;
            log.best_score = score;
            best = matcher.params;
        }
    };

    for (int step = 0; step < schedule.finetune_steps; ++step) {
        StepBatch batch;
        std::vector<std::pair<int, int>> pairs;
        struct RefEntry {
            int ref;
            std::size_t first_pair, n_pairs;
        };
        std::vector<RefEntry> refs;
        for (int b = 0; b < schedule.finetune_images; ++b) {
            const auto sample = draw_sample(corpus, config, rng, log);
            const Image& clean = *sample.clean;
            const int rows = patch_positions(clean.height), cols = patch_positions(clean.width);
            const int bh = std::min(schedule.finetune_block, rows), bw = std::min(schedule.finetune_block, cols);
            const int br = std::uniform_int_distribution<int>(0, rows - bh)(rng);
            const int bc = std::uniform_int_distribution<int>(0, cols - bw)(rng);
            std::vector<int> block(static_cast<std::size_t>(bh * bw));
            std::iota(block.begin(), block.end(), 0);
            std::shuffle(block.begin(), block.end(), rng);
            block.resize(std::min<std::size_t>(block.size(), static_cast<std::size_t>(schedule.finetune_refs)));

            std::unordered_map<int, int> local;  // position -> batch index
            auto index_of = [&](int r, int c) {
                const auto [it, fresh] = local.try_emplace(r * cols + c, batch.count);
                if (fresh) batch.add(sample.padded, sample.noisy, clean, r, c, raster);
                return it->second;
            };
            for (int k : block) {
                const int r = br + k / bw, c = bc + k % bw;
                const int ref = index_of(r, c);
                const auto members = window_members(clean.height, clean.width, r, c, schedule.train_window_radius);
                refs.push_back({ref, pairs.size(), members.size()});
                for (const auto& m : members) pairs.emplace_back(ref, index_of(m.row, m.col));
            }
        }
        const double lr = schedule.lr_at(step, schedule.finetune_steps);
        SBM_REQUIRE(!pairs.empty(), "finetune_match: sampled references have no window candidates");
        const auto& scores = pass.forward(matcher, batch.tensor(), pairs);
        auto grad = nn::Tensor<float>::matrix(static_cast<int>(pairs.size()), kNumGroups);
        const double norm = 1.0 / (static_cast<double>(refs.size()) * kPatchValues);
        double loss = 0.0;
        for (const auto& e : refs) {
            AggregationInput<float> in;
            in.reference = batch.s(e.ref);
            for (std::size_t p = e.first_pair; p < e.first_pair + e.n_pairs; ++p)
                in.candidates.push_back(batch.s(pairs[p].second));
            in.scores = std::span<const float>(scores.data).subspan(e.first_pair * kNumGroups, e.n_pairs * kNumGroups);
            const auto fl = loss_full<float>(batch.r(e.ref), in);
            loss += fl.loss * norm;
            float* g = grad.data.data() + e.first_pair * kNumGroups;
            for (std::size_t i = 0; i < fl.grad_scores.size(); ++i) g[i] = static_cast<float>(fl.grad_scores[i] * norm);
        }
        pass.backward(matcher, grad);
        nn::adam_step(matcher.params, lr);
        log.loss.push_back(loss);
        log.lr.push_back(lr);
        if (selecting && (step + 1) % schedule.val_every == 0) check(step + 1);
    }
    if (selecting) {
        if (schedule.finetune_steps == 0 || schedule.finetune_steps % schedule.val_every != 0)
            check(schedule.finetune_steps);
        matcher.params = best;
    }
    log.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return log;
}

}  // namespace sbm
