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

#include "sbmatch/harness/pipeline.hpp"

#include <chrono>
#include <random>

#include <fmt/format.h>

#include "sbmatch/aggregate.hpp"
#include "sbmatch/error.hpp"
#include "sbmatch/nn/checkpoint.hpp"

namespace sbm {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Stage1Options stage1_options(const DenoiseConfig& config) { return {config.window_radius, config.ref_batch}; }

}  // namespace

MatcherTraining train_matcher(const Settings& settings, std::span<const Image> train, std::span<const Image> val,
                              bool pretrain) {
    settings.validate();
    MatcherTraining out{Matcher<float>::init(MatcherArch::build(settings.matcher), settings.denoise.seed), {}, {}};
    if (pretrain && settings.schedule.pretrain_steps > 0)
        out.pretrain = pretrain_match(train, settings.denoise, settings.schedule, out.matcher, settings.denoise.seed + 1);
    ValidationFn validate;
    if (settings.schedule.select_on_val && !val.empty()) {
        const auto n = std::min<std::size_t>(val.size(), static_cast<std::size_t>(settings.schedule.val_images));
        DenoiseConfig vcfg = settings.denoise;
        vcfg.window_radius = settings.schedule.train_window_radius;
        const auto set = make_eval_set(val.first(n), vcfg, settings.denoise.seed + 7);
        validate = [set, vcfg](const Matcher<float>& m) {
            double sum = 0.0;
            for (std::size_t i = 0; i < set.clean.size(); ++i)
                sum += psnr(set.clean[i], denoise_stage1(set.noisy[i], m, stage1_options(vcfg)));
            return sum / static_cast<double>(set.clean.size());
        };
    }
    out.finetune =
        finetune_match(train, settings.denoise, settings.schedule, out.matcher, settings.denoise.seed + 2, validate);
    return out;
}

std::vector<RefineSample> make_refine_set(const Settings& settings, std::span<const Image> train,
                                          const Matcher<float>& matcher) {
    SBM_REQUIRE(!train.empty(), "make_refine_set: empty corpus");
    const auto n = std::min<std::size_t>(train.size(), static_cast<std::size_t>(settings.schedule.refine_images));
    const auto set = make_eval_set(train.first(n), settings.denoise, settings.denoise.seed + 3);
    std::vector<RefineSample> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({set.clean[i], set.noisy[i], denoise_stage1(set.noisy[i], matcher, stage1_options(settings.denoise))});
    return out;
}

RefinerTraining train_refiner(const Settings& settings, std::span<const Image> train, const Matcher<float>& matcher) {
    settings.validate();
    const auto t0 = Clock::now();
    const auto samples = make_refine_set(settings, train, matcher);
    RefinerTraining out{Refiner<float>::init(RefineArch::build(settings.refine_width), settings.denoise.seed + 4), {}, 0.0};
    RefineSchedule rs;
    rs.steps = settings.schedule.refine_steps;
    rs.lr = settings.schedule.lr;
    rs.crop = settings.schedule.refine_crop;
    rs.batch = settings.schedule.refine_batch;
    rs.lr_drop_steps = settings.schedule.milestone_steps(rs.steps);
    rs.seed = settings.denoise.seed + 5;
    out.log = train_refine(samples, out.refiner, rs);
    out.seconds = seconds_since(t0);
    return out;
}

Image denoise(const Image& noisy, const Matcher<float>& matcher, const Refiner<float>* refiner,
              const DenoiseConfig& config) {
    config.validate();
    Image stage1 = denoise_stage1(noisy, matcher, stage1_options(config));
    if (config.stage == Stage::match) return stage1;
    SBM_REQUIRE(refiner != nullptr, "denoise: stage 'full' needs a refiner");
    return refine_forward(noisy, stage1, *refiner);
}

EvalSet make_eval_set(std::span<const Image> clean, const DenoiseConfig& config, std::uint64_t seed,
                      std::vector<std::string> names) {
    SBM_REQUIRE(names.empty() || names.size() == clean.size(), "make_eval_set: name count mismatch");
    EvalSet set;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double sigma = config.draw_sigma(rng);
        set.clean.push_back(clean[i]);
        set.noisy.push_back(add_noise(clean[i], {sigma, rng()}));
        set.sigmas.push_back(sigma);
        set.names.push_back(names.empty() ? fmt::format("{:03}", i) : names[i]);
    }
    return set;
}

MetricsReport evaluate_model(const EvalSet& set, const Matcher<float>& matcher, const Refiner<float>* refiner,
                             const DenoiseConfig& config, std::vector<Image>* outputs) {
    config.validate();
    SBM_REQUIRE(config.stage == Stage::match || refiner != nullptr, "evaluate_model: stage 'full' needs a refiner");
    std::vector<Image> result;
    double t_match = 0.0, t_refine = 0.0;
    for (const auto& noisy : set.noisy) {
        auto t0 = Clock::now();
        Image img = denoise_stage1(noisy, matcher, stage1_options(config));
        t_match += seconds_since(t0);
        if (config.stage == Stage::full) {
            t0 = Clock::now();
            img = refine_forward(noisy, img, *refiner);
            t_refine += seconds_since(t0);
        }
        result.push_back(std::move(img));
    }
    auto report = evaluate(set.clean, set.noisy, result, set.names);
    report.timings.emplace_back("match_average", t_match);
    if (config.stage == Stage::full) report.timings.emplace_back("refine", t_refine);
    if (outputs) *outputs = std::move(result);
    return report;
}

std::vector<AblationRow> ablate_window(const Matcher<float>& matcher, const EvalSet& set, std::span<const int> radii,
                                       const DenoiseConfig& config) {
    std::vector<AblationRow> rows;
    for (int radius : radii) {
        SBM_REQUIRE(radius >= 1, "ablate_window: radius must be >= 1");
        DenoiseConfig cfg = config;
        cfg.window_radius = radius;
        AblationRow row{radius, 0.0, 0.0};
        for (std::size_t i = 0; i < set.noisy.size(); ++i) {
            const auto t0 = Clock::now();
            const Image out = denoise_stage1(set.noisy[i], matcher, stage1_options(cfg));
            row.seconds += seconds_since(t0);
            row.psnr += psnr(set.clean[i], out) / static_cast<double>(set.noisy.size());
        }
        rows.push_back(row);
    }
    return rows;
}

std::string format_ablation(std::span<const AblationRow> rows) {
    std::string out = fmt::format("{:>8} {:>8} {:>10} {:>10}\n", "radius", "window", "psnr_dB", "seconds");
    for (const auto& r : rows)
        out += fmt::format("{:>8} {:>8} {:>10.4f} {:>10.3f}\n", r.radius, fmt::format("{0}x{0}", 2 * r.radius + 1),
                           r.psnr, r.seconds);
    return out;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
    std::string out = "radius,psnr,seconds\n";
    for (const auto& r : rows) out += fmt::format("{},{:.6f},{:.6f}\n", r.radius, r.psnr, r.seconds);
    return out;
}

ScoreSelector ScoreSelector::parse(std::string_view text) {
    ScoreSelector s;
    auto number_after = [&](std::string_view prefix, int hi) {
        const auto rest = text.substr(prefix.size());
        int v = -1;
        try {
            std::size_t used = 0;
            v = std::stoi(std::string(rest), &used);
            if (used != rest.size()) v = -1;
        } catch (const std::exception&) {
            v = -1;
        }
        if (v < 0 || v > hi) throw ConfigError(fmt::format("score selector '{}': index out of range", text));
        return v;
    };
    if (text == "mean") return s;
    if (text.starts_with("scale:")) {
        s.kind = Kind::scale;
        s.index = number_after("scale:", 3);
        return s;
    }
    if (text.starts_with("group:")) {
        s.kind = Kind::group;
        s.index = number_after("group:", kNumGroups - 1);
        return s;
    }
    throw ConfigError(fmt::format("score selector '{}': expected mean, scale:N or group:N", text));
}

float ScoreSelector::reduce(std::span<const float> scores) const {
    SBM_REQUIRE(scores.size() == kNumGroups, "ScoreSelector: expected 30 scores");
    if (kind == Kind::group) return scores[static_cast<std::size_t>(index)];
    double sum = 0.0;
    int n = 0;
    for (int g = 0; g < kNumGroups; ++g) {
        const auto& info = group_table()[static_cast<std::size_t>(g)];
        const int scale = info.orientation == Orientation::scaling ? 3 : info.scale;
        if (kind == Kind::mean || scale == index) {
            sum += scores[static_cast<std::size_t>(g)];
            ++n;
        }
    }
    return static_cast<float>(sum / n);
}

std::vector<float> score_map(const Image& noisy, const Matcher<float>& matcher, const PatchRef& ref, int radius,
                             const ScoreSelector& selector) {
    const int rows = patch_positions(noisy.height), cols = patch_positions(noisy.width);
    SBM_REQUIRE(ref.row >= 0 && ref.col >= 0 && ref.row < rows && ref.col < cols,
                "score_map: reference outside the valid patch positions");
    SBM_REQUIRE(radius >= 1, "score_map: radius must be >= 1");
    const int side = 2 * radius + 1;
    std::vector<float> map(static_cast<std::size_t>(side) * side, -1.0f);
    map[static_cast<std::size_t>(radius * side + radius)] = 1.0f;
    const auto members = window_members(noisy.height, noisy.width, ref.row, ref.col, radius);
    if (members.empty()) return map;
    const ImageScorer scorer(noisy, matcher);
    std::vector<float> scores(members.size() * kNumGroups);
    scorer.score(ref, members, scores);
    for (std::size_t i = 0; i < members.size(); ++i) {
        const int dr = members[i].row - ref.row + radius, dc = members[i].col - ref.col + radius;
        map[static_cast<std::size_t>(dr * side + dc)] =
            selector.reduce(std::span<const float>(scores).subspan(i * kNumGroups, kNumGroups));
    }
    return map;
}

Image score_map_image(std::span<const float> map, int radius, int zoom) {
    const int side = 2 * radius + 1;
    SBM_REQUIRE(map.size() == static_cast<std::size_t>(side) * side, "score_map_image: map size mismatch");
    SBM_REQUIRE(zoom >= 1, "score_map_image: zoom must be >= 1");
    Image img(side * zoom, side * zoom);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            const float v = map[static_cast<std::size_t>((r / zoom) * side + c / zoom)];
            if (v < 0.0f) {
                img.at(r, c, 0) = 64.0f;
                img.at(r, c, 1) = img.at(r, c, 2) = 0.0f;
            } else {
                for (int ch = 0; ch < kChannels; ++ch) img.at(r, c, ch) = 255.0f * v;
            }
        }
    return img;
}

void save_matcher(const std::filesystem::path& path, const Matcher<float>& matcher) {
    nn::save_checkpoint(path, matcher.arch.manifest(), 0, matcher.params, false);
}

Matcher<float> load_matcher(const std::filesystem::path& path) {
    auto ck = nn::load_checkpoint(path);
    Matcher<float> m;
    m.arch = MatcherArch::from_manifest(ck.manifest);
    m.params = std::move(ck.params);
    auto expected = Matcher<float>::init(m.arch, 0);
    for (const auto& e : expected.params.entries()) {
        const auto* got = m.params.find(e.name);
        if (!got || got->shape != e.shape)
            throw FormatError(path.string() + ": parameter '" + e.name + "' missing or misshapen");
    }
    return m;
}

void save_refiner(const std::filesystem::path& path, const Refiner<float>& refiner, const Matcher<float>& matcher) {
    nn::save_checkpoint(path, refiner.arch.manifest(), nn::params_digest(matcher.params), refiner.params, false);
}

Refiner<float> load_refiner(const std::filesystem::path& path, const Matcher<float>& matcher) {
    auto ck = nn::load_checkpoint(path);
    if (ck.parent_digest != nn::params_digest(matcher.params))
        throw FormatError(path.string() + ": refiner was trained against a different matcher checkpoint");
    Refiner<float> r;
    r.arch = RefineArch::from_manifest(ck.manifest);
    r.params = std::move(ck.params);
    auto expected = Refiner<float>::init(r.arch, 0);
    for (const auto& e : expected.params.entries()) {
        const auto* got = r.params.find(e.name);
        if (!got || got->shape != e.shape)
            throw FormatError(path.string() + ": parameter '" + e.name + "' missing or misshapen");
    }
    return r;
}

}  // namespace sbm
