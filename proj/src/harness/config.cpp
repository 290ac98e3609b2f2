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

#include "sbmatch/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "sbmatch/error.hpp"

namespace sbm {
namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class N>
N parse_number(std::string_view key, std::string_view v) {
    N out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(fmt::format("{}: cannot parse '{}' as a number", key, v));
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(fmt::format("{}: expected a boolean, got '{}'", key, v));
}

std::vector<double> parse_list(std::string_view key, std::string_view v) {
    std::vector<double> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        out.push_back(parse_number<double>(key, trim(v.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

struct Field {
    std::string key;
    std::function<void(Settings&, std::string_view)> set;
    std::function<std::string(const Settings&)> get;
};

#define SBM_INT_FIELD(name, expr)                                                                       \
    Field{name, [](Settings& s, std::string_view v) { s.expr = parse_number<int>(name, v); },          \
          [](const Settings& s) { return std::to_string(s.expr); }}
#define SBM_DOUBLE_FIELD(name, expr)                                                                    \
    Field{name, [](Settings& s, std::string_view v) { s.expr = parse_number<double>(name, v); },       \
          [](const Settings& s) { return fmt::format("{}", s.expr); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        SBM_INT_FIELD("window_radius", denoise.window_radius),
        Field{"sigma_mode", [](Settings& s, std::string_view v) { s.denoise.sigma_mode = parse_sigma_mode(v); },
              [](const Settings& s) { return std::string(to_string(s.denoise.sigma_mode)); }},
        SBM_DOUBLE_FIELD("sigma", denoise.sigma),
        SBM_DOUBLE_FIELD("blind_low", denoise.blind_low),
        SBM_DOUBLE_FIELD("blind_high", denoise.blind_high),
        Field{"stage", [](Settings& s, std::string_view v) { s.denoise.stage = parse_stage(v); },
              [](const Settings& s) { return std::string(to_string(s.denoise.stage)); }},
        Field{"seed", [](Settings& s, std::string_view v) { s.denoise.seed = parse_number<std::uint64_t>("seed", v); },
              [](const Settings& s) { return std::to_string(s.denoise.seed); }},
        SBM_INT_FIELD("ref_batch", denoise.ref_batch),
        SBM_INT_FIELD("pretrain_steps", schedule.pretrain_steps),
        SBM_INT_FIELD("finetune_steps", schedule.finetune_steps),
        SBM_INT_FIELD("refine_steps", schedule.refine_steps),
        SBM_DOUBLE_FIELD("lr", schedule.lr),
        Field{"lr_milestones",
              [](Settings& s, std::string_view v) { s.schedule.lr_milestones = parse_list("lr_milestones", v); },
              [](const Settings& s) {
                  std::string out;
                  for (double m : s.schedule.lr_milestones) out += (out.empty() ? "" : ",") + fmt::format("{}", m);
                  return out;
              }},
        SBM_INT_FIELD("pretrain_images", schedule.pretrain_images),
        SBM_INT_FIELD("pretrain_crop", schedule.pretrain_crop),
        SBM_INT_FIELD("finetune_images", schedule.finetune_images),
        SBM_INT_FIELD("finetune_refs", schedule.finetune_refs),
        SBM_INT_FIELD("finetune_block", schedule.finetune_block),
        SBM_INT_FIELD("train_window_radius", schedule.train_window_radius),
        SBM_INT_FIELD("refine_images", schedule.refine_images),
        SBM_INT_FIELD("refine_crop", schedule.refine_crop),
        SBM_INT_FIELD("refine_batch", schedule.refine_batch),
        Field{"select_on_val",
              [](Settings& s, std::string_view v) { s.schedule.select_on_val = parse_bool("select_on_val", v); },
              [](const Settings& s) { return std::string(s.schedule.select_on_val ? "true" : "false"); }},
        SBM_INT_FIELD("val_every", schedule.val_every),
        SBM_INT_FIELD("val_images", schedule.val_images),
        SBM_INT_FIELD("corpus_count", corpus.count),
        SBM_INT_FIELD("corpus_val", corpus.val_count),
        SBM_INT_FIELD("corpus_size", corpus.size),
        Field{"corpus_kind", [](Settings& s, std::string_view v) { s.corpus.kind = parse_corpus_kind(v); },
              [](const Settings& s) { return std::string(to_string(s.corpus.kind)); }},
        Field{"corpus_seed",
              [](Settings& s, std::string_view v) { s.corpus.seed = parse_number<std::uint64_t>("corpus_seed", v); },
              [](const Settings& s) { return std::to_string(s.corpus.seed); }},
        SBM_INT_FIELD("matcher_width1", matcher.stage1),
        SBM_INT_FIELD("matcher_width2", matcher.stage2),
        SBM_INT_FIELD("matcher_width3", matcher.stage3),
        SBM_INT_FIELD("feature_dim", matcher.feature_dim),
        SBM_INT_FIELD("compare_width", matcher.hidden),
        SBM_INT_FIELD("refine_width", refine_width),
    };
    return table;
}

}  // namespace

std::string_view to_string(SigmaMode m) { return m == SigmaMode::fixed ? "fixed" : "blind"; }
std::string_view to_string(Stage s) { return s == Stage::match ? "match" : "full"; }
std::string_view to_string(CorpusKind k) {
    switch (k) {
        case CorpusKind::tiled_texture: return "tiled-texture";
        case CorpusKind::repeated_stripe: return "repeated-stripe";
        case CorpusKind::mixed: return "mixed";
    }
    return "?";
}

SigmaMode parse_sigma_mode(std::string_view s) {
    if (s == "fixed") return SigmaMode::fixed;
    if (s == "blind") return SigmaMode::blind;
    throw ConfigError(fmt::format("sigma_mode: expected fixed or blind, got '{}'", s));
}

Stage parse_stage(std::string_view s) {
    if (s == "match") return Stage::match;
    if (s == "full") return Stage::full;
    throw ConfigError(fmt::format("stage: expected match or full, got '{}'", s));
}

CorpusKind parse_corpus_kind(std::string_view s) {
    if (s == "tiled-texture") return CorpusKind::tiled_texture;
    if (s == "repeated-stripe") return CorpusKind::repeated_stripe;
    if (s == "mixed") return CorpusKind::mixed;
    throw ConfigError(fmt::format("corpus_kind: expected tiled-texture, repeated-stripe or mixed, got '{}'", s));
}

void DenoiseConfig::validate() const {
    if (patch_size != kPatchSize) throw ConfigError("patch_size must be 8");
    if (context_size != patch_size + 8) throw ConfigError("context_size must equal patch_size + 8");
    if (window_radius < 1) throw ConfigError("window_radius must be >= 1");
    if (sigma < 0.0) throw ConfigError("sigma must be >= 0");
    if (sigma_mode == SigmaMode::blind && !(blind_low >= 0.0 && blind_low < blind_high))
        throw ConfigError("blind range requires 0 <= blind_low < blind_high");
    if (ref_batch < 1) throw ConfigError("ref_batch must be >= 1");
}

double DenoiseConfig::draw_sigma(std::mt19937_64& rng) const {
    if (sigma_mode == SigmaMode::fixed) return sigma;
    return std::uniform_real_distribution<double>(blind_low, blind_high)(rng);
}

void TrainSchedule::validate() const {
    if (pretrain_steps < 0 || finetune_steps < 0 || refine_steps < 0) throw ConfigError("step counts must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    for (double m : lr_milestones)
        if (!(m > 0.0 && m <= 1.0)) throw ConfigError("lr_milestones must lie in (0, 1]");
    if (pretrain_images < 1 || finetune_images < 1 || finetune_refs < 1 || finetune_block < 1)
        throw ConfigError("batch sizes must be >= 1");
    if (pretrain_crop != 0 && pretrain_crop < kContextSize && pretrain_crop > 0)
        throw ConfigError("pretrain_crop must be 0 or >= 16");
    if (train_window_radius < 1) throw ConfigError("train_window_radius must be >= 1");
    if (refine_images < 1 || refine_batch < 1) throw ConfigError("refine batch sizes must be >= 1");
    if (val_every < 1 || val_images < 1) throw ConfigError("val_every and val_images must be >= 1");
}

std::vector<int> TrainSchedule::milestone_steps(int steps) const {
    std::vector<int> out;
    for (double m : lr_milestones) out.push_back(static_cast<int>(std::lround(m * steps)));
    return out;
}

double TrainSchedule::lr_at(int step, int steps) const {
    int drops = 0;
    for (int m : milestone_steps(steps))
        if (step >= m) ++drops;
    return lr * std::pow(10.0, -0.5 * drops);
}

void CorpusSpec::validate() const {
    if (count < 0 || val_count < 0) throw ConfigError("corpus counts must be >= 0");
    if (size < 32) throw ConfigError("corpus_size must be >= 32");
}

void Settings::validate() const {
    denoise.validate();
    schedule.validate();
    corpus.validate();
    if (matcher.stage1 < 1 || matcher.stage2 < 1 || matcher.stage3 < 1 || matcher.feature_dim < 1 ||
        matcher.hidden < 1 || refine_width < 1)
        throw ConfigError("network widths must be >= 1");
}

ConfigFile ConfigFile::parse(std::string_view text, std::string source) {
    ConfigFile cfg;
    cfg.source = std::move(source);
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(fmt::format("{}:{}: expected 'key = value'", cfg.source, line_no));
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", cfg.source, line_no));
        if (cfg.entries.contains(std::string(key)))
            throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", cfg.source, line_no, key));
        cfg.entries[std::string(key)] = {std::string(value), line_no};
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void set_setting(Settings& settings, std::string_view key, std::string_view value) {
    for (const auto& f : fields())
        if (f.key == key) {
            f.set(settings, trim(value));
            return;
        }
    throw ConfigError(fmt::format("unknown config key '{}'", key));
}

void apply_config(const ConfigFile& file, Settings& settings) {
    for (const auto& [key, entry] : file.entries) {
        try {
            set_setting(settings, key, entry.value);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}:{}: {}", file.source, entry.line, e.what()));
        }
    }
}

const std::vector<std::string>& settings_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& f : fields()) k.push_back(f.key);
        return k;
    }();
    return keys;
}

std::string format_settings(const Settings& settings) {
    std::string out;
    for (const auto& f : fields()) out += f.key + " = " + f.get(settings) + "\n";
    return out;
}

}  // namespace sbm
