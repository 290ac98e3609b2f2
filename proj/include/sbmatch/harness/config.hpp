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

// Pipeline settings and the flat `key = value` config file.
//
// Config files hold one `key = value` pair per line; `#` starts a comment and
// blank lines are ignored. Keys are the names listed by settings_keys().
// Command-line flags are applied after the file and override it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sbmatch/matcher.hpp"

namespace sbm {

enum class SigmaMode { fixed, blind };
enum class Stage { match, full };
enum class CorpusKind { tiled_texture, repeated_stripe, mixed };

std::string_view to_string(SigmaMode m);
std::string_view to_string(Stage s);
std::string_view to_string(CorpusKind k);
SigmaMode parse_sigma_mode(std::string_view s);
Stage parse_stage(std::string_view s);
CorpusKind parse_corpus_kind(std::string_view s);

struct DenoiseConfig {
    int patch_size = kPatchSize;
    int context_size = kContextSize;
    int window_radius = 15;
    SigmaMode sigma_mode = SigmaMode::fixed;
    double sigma = 25.0;
    double blind_low = 0.0;
    double blind_high = 55.0;
    Stage stage = Stage::full;
    std::uint64_t seed = 1;
    int ref_batch = 16;  // references per batched comparison pass at inference

    void validate() const;
    // Fixed mode returns sigma; blind mode draws U[blind_low, blind_high].
    double draw_sigma(std::mt19937_64& rng) const;
};

inline constexpr double kLrDropFactor = 0.31622776601683794;  // 10^-0.5

struct TrainSchedule {
    int pretrain_steps = 5000;
    int finetune_steps = 3000;
    int refine_steps = 3000;
    double lr = 1e-3;
    std::vector<double> lr_milestones = {0.60, 0.85};  // fractions of the stage's steps

    // Pre-training batch: images per step; every non-overlapping 8x8 patch of a
    // random crop of each image is paired with a shuffled partner.
    int pretrain_images = 4;
    int pretrain_crop = 32;  // <= 0 uses the whole image
    // Fine-tuning batch: references per image, drawn from a block of
    // finetune_block x finetune_block positions around a uniform center.
    int finetune_images = 1;
    int finetune_refs = 8;
    int finetune_block = 4;
    int train_window_radius = 7;

    int refine_images = 16;
    int refine_crop = 48;
    int refine_batch = 2;

    // Limited-data mode: validate every val_every fine-tune steps and keep the
    // best checkpoint.
    bool select_on_val = false;
    int val_every = 500;
    int val_images = 4;

    void validate() const;
    std::vector<int> milestone_steps(int steps) const;
    double lr_at(int step, int steps) const;
};

struct CorpusSpec {
    int count = 64;
    int val_count = 8;
    int size = 96;
    CorpusKind kind = CorpusKind::mixed;
    std::uint64_t seed = 1;

    void validate() const;
};

struct Settings {
    DenoiseConfig denoise;
    TrainSchedule schedule;
    CorpusSpec corpus;
    MatcherWidths matcher;
    int refine_width = 32;

    void validate() const;
};

struct ConfigEntry {
    std::string value;
    int line = 0;
};

struct ConfigFile {
    std::string source;
    std::map<std::string, ConfigEntry> entries;

    static ConfigFile parse(std::string_view text, std::string source = "<string>");
    static ConfigFile load(const std::filesystem::path& path);
};

// Throws ConfigError naming the key (and line, for file entries).
void set_setting(Settings& settings, std::string_view key, std::string_view value);
void apply_config(const ConfigFile& file, Settings& settings);
const std::vector<std::string>& settings_keys();
std::string format_settings(const Settings& settings);

}  // namespace sbm
