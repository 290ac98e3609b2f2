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

// End-to-end pipeline: training both stages, checkpoint files, denoising,
// evaluation on a held-out set, the search-window ablation and score maps.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbmatch/harness/config.hpp"
#include "sbmatch/harness/metrics.hpp"
#include "sbmatch/harness/train.hpp"
#include "sbmatch/matcher.hpp"
#include "sbmatch/refine.hpp"

namespace sbm {

struct MatcherTraining {
    Matcher<float> matcher;
    TrainLog pretrain;
    TrainLog finetune;
};

// Pre-training (skipped when `pretrain` is false or pretrain_steps is 0)
// followed by fine-tuning. val is used only for limited-data model selection.
MatcherTraining train_matcher(const Settings& settings, std::span<const Image> train, std::span<const Image> val,
                              bool pretrain = true);

// Stage-1 outputs of the frozen matcher on the first refine_images training
// images, each with its own noise draw.
std::vector<RefineSample> make_refine_set(const Settings& settings, std::span<const Image> train,
                                          const Matcher<float>& matcher);

struct RefinerTraining {
    Refiner<float> refiner;
    RefineTrainLog log;
    double seconds = 0.0;
};

RefinerTraining train_refiner(const Settings& settings, std::span<const Image> train, const Matcher<float>& matcher);

// Stage per config.stage; Stage::full requires a refiner.
Image denoise(const Image& noisy, const Matcher<float>& matcher, const Refiner<float>* refiner,
              const DenoiseConfig& config);

struct EvalSet {
    std::vector<Image> clean;
    std::vector<Image> noisy;
    std::vector<std::string> names;
    std::vector<double> sigmas;
};

// Noise per image from config (fixed sigma or a blind draw), seeded by seed.
EvalSet make_eval_set(std::span<const Image> clean, const DenoiseConfig& config, std::uint64_t seed,
                      std::vector<std::string> names = {});

// Denoises every noisy image of the set and reports metrics with timings.
MetricsReport evaluate_model(const EvalSet& set, const Matcher<float>& matcher, const Refiner<float>* refiner,
                             const DenoiseConfig& config, std::vector<Image>* outputs = nullptr);

struct AblationRow {
    int radius = 0;
    double psnr = 0.0;
    double seconds = 0.0;
};

std::vector<AblationRow> ablate_window(const Matcher<float>& matcher, const EvalSet& set, std::span<const int> radii,
                                       const DenoiseConfig& config);
std::string format_ablation(std::span<const AblationRow> rows);
std::string ablation_csv(std::span<const AblationRow> rows);

// Which scores a map shows: the mean over all 30 groups, the mean over one
// scale (0 coarse .. 2 fine, or 3 for the scaling groups), or a single group.
struct ScoreSelector {
    enum class Kind { mean, scale, group } kind = Kind::mean;
    int index = 0;

    static ScoreSelector parse(std::string_view text);  // "mean", "scale:N", "group:N"
    float reduce(std::span<const float> scores) const;
};

// (2r+1) x (2r+1) map of scores from the reference at ref to every window
// member. The center holds 1 and positions outside the image hold -1.
std::vector<float> score_map(const Image& noisy, const Matcher<float>& matcher, const PatchRef& ref, int radius,
                             const ScoreSelector& selector);
// Maps scores in [0,1] to gray levels, outside positions to a dark red, and
// upsamples by `zoom` with nearest neighbor.
Image score_map_image(std::span<const float> map, int radius, int zoom);

// Checkpoint files.
void save_matcher(const std::filesystem::path& path, const Matcher<float>& matcher);
Matcher<float> load_matcher(const std::filesystem::path& path);
void save_refiner(const std::filesystem::path& path, const Refiner<float>& refiner, const Matcher<float>& matcher);
// Throws FormatError when the refiner was trained against a different matcher.
Refiner<float> load_refiner(const std::filesystem::path& path, const Matcher<float>& matcher);

}  // namespace sbm
