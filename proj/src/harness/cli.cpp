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

#include "sbmatch/harness/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sbmatch/error.hpp"
#include "sbmatch/harness/corpus.hpp"
#include "sbmatch/harness/pipeline.hpp"

namespace sbm {
namespace {

namespace fs = std::filesystem;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

Settings load_settings(const Common& common) {
    Settings s;
    if (!common.config_path.empty()) apply_config(ConfigFile::load(common.config_path), s);
    for (const auto& kv : common.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("--set '{}': expected key=value", kv));
        auto key = kv.substr(0, eq);
        while (!key.empty() && key.back() == ' ') key.pop_back();
        set_setting(s, key, kv.substr(eq + 1));
    }
    if (common.seed) s.denoise.seed = *common.seed;
    return s;
}

// Applies --sigma / --blind to the settings.
void apply_noise_flags(Settings& s, const std::optional<double>& sigma, bool blind) {
    if (sigma && blind) throw ConfigError("--sigma and --blind are mutually exclusive");
    if (sigma) {
        s.denoise.sigma_mode = SigmaMode::fixed;
        s.denoise.sigma = *sigma;
    }
    if (blind) s.denoise.sigma_mode = SigmaMode::blind;
}

std::vector<Image> images_of(const std::vector<NamedImage>& named) {
    std::vector<Image> out;
    for (const auto& n : named) out.push_back(n.image);
    return out;
}

std::vector<std::string> names_of(const std::vector<NamedImage>& named) {
    std::vector<std::string> out;
    for (const auto& n : named) out.push_back(n.name);
    return out;
}

// Training images from --data (DIR/train if present, else DIR) or, without
// --data, the synthetic corpus described by the settings.
void training_data(const Settings& s, const std::string& data, std::vector<Image>& train, std::vector<Image>& val) {
    if (data.empty()) {
        const auto corpus = synth_corpus(s.corpus);
        train = corpus.train_images();
        val = corpus.val_images();
        return;
    }
    const fs::path dir(data);
    train = images_of(read_image_dir(fs::is_directory(dir / "train") ? dir / "train" : dir));
    if (fs::is_directory(dir / "val")) val = images_of(read_image_dir(dir / "val"));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError(path, "cannot open for writing");
    f << text;
    if (!f) throw IoError(path, "write failed");
}

std::string loss_csv(const TrainLog& log, const std::string& stage) {
    std::string out;
    for (std::size_t i = 0; i < log.loss.size(); ++i)
        out += fmt::format("{},{},{:.8g},{:.8g}\n", stage, i, log.loss[i], log.lr[i]);
    return out;
}

PatchRef parse_ref(const std::string& text) {
    const auto comma = text.find(',');
    try {
        if (comma == std::string::npos) throw std::invalid_argument("comma");
        return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1)), kPatchSize};
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("--ref '{}': expected row,col", text));
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sub-band self-similarity denoiser"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--config", common.config_path, "key = value settings file");
    app.add_option("--set", common.overrides, "override one setting, key=value (repeatable)");
    app.add_option("--seed", common.seed, "random seed");

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic train/val corpus as PNG files");
    std::string synth_out;
    std::optional<int> synth_count, synth_val, synth_size;
    std::optional<std::string> synth_kind;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--count", synth_count, "training images");
    synth->add_option("--val", synth_val, "validation images");
    synth->add_option("--size", synth_size, "image side in pixels");
    synth->add_option("--kind", synth_kind, "tiled-texture | repeated-stripe | mixed");

    // train-match
    auto* tmatch = app.add_subcommand("train-match", "pre-train and fine-tune the matcher");
    std::string tm_data, tm_out, tm_log;
    std::optional<double> tm_sigma;
    bool tm_blind = false, tm_no_pretrain = false, tm_select = false;
    std::optional<int> tm_pre, tm_fine;
    tmatch->add_option("--data", tm_data, "image directory (uses DIR/train and DIR/val when present)");
    tmatch->add_option("--out", tm_out, "matcher checkpoint to write")->required();
    tmatch->add_option("--sigma", tm_sigma, "fixed training noise level");
    tmatch->add_flag("--blind", tm_blind, "draw sigma per image from [blind_low, blind_high]");
    tmatch->add_option("--pretrain-steps", tm_pre);
    tmatch->add_option("--finetune-steps", tm_fine);
    tmatch->add_flag("--no-pretrain", tm_no_pretrain, "fine-tune from random initialization");
    tmatch->add_flag("--select-on-val", tm_select, "keep the best checkpoint on the validation split");
    tmatch->add_option("--log", tm_log, "write per-step loss as CSV");

    // train-refine
    auto* trefine = app.add_subcommand("train-refine", "train the residual refiner on stage-1 outputs");
    std::string tr_data, tr_matcher, tr_out, tr_log;
    std::optional<double> tr_sigma;
    bool tr_blind = false;
    std::optional<int> tr_steps;
    trefine->add_option("--data", tr_data, "image directory (uses DIR/train when present)");
    trefine->add_option("--matcher", tr_matcher, "frozen matcher checkpoint")->required();
    trefine->add_option("--out", tr_out, "refiner checkpoint to write")->required();
    trefine->add_option("--sigma", tr_sigma);
    trefine->add_flag("--blind", tr_blind);
    trefine->add_option("--steps", tr_steps);
    trefine->add_option("--log", tr_log, "write per-step loss as CSV");

    // denoise
    auto* den = app.add_subcommand("denoise", "denoise one image");
    std::string dn_in, dn_out, dn_matcher, dn_refiner, dn_clean, dn_noisy_out;
    std::optional<std::string> dn_stage;
    std::optional<double> dn_sigma;
    bool dn_blind = false;
    std::optional<int> dn_window;
    den->add_option("--input", dn_in, "input image")->required();
    den->add_option("--output", dn_out, "output image")->required();
    den->add_option("--matcher", dn_matcher, "matcher checkpoint")->required();
    den->add_option("--refiner", dn_refiner, "refiner checkpoint (stage full)");
    den->add_option("--stage", dn_stage, "match | full");
    den->add_option("--sigma", dn_sigma, "treat the input as clean and add noise of this level first");
    den->add_flag("--blind", dn_blind, "treat the input as clean and add noise of a random level first");
    den->add_option("--window", dn_window, "search window radius");
    den->add_option("--clean", dn_clean, "clean reference for a PSNR report");
    den->add_option("--noisy-out", dn_noisy_out, "write the synthesized noisy image");

    // eval
    auto* ev = app.add_subcommand("eval", "metrics over an image set");
    std::string ev_clean, ev_denoised, ev_noisy, ev_matcher, ev_refiner, ev_csv, ev_out_dir;
    std::optional<std::string> ev_stage;
    std::optional<double> ev_sigma;
    bool ev_blind = false;
    std::optional<int> ev_window;
    ev->add_option("--clean", ev_clean, "clean image directory")->required();
    ev->add_option("--denoised", ev_denoised, "denoised image directory (compare mode)");
    ev->add_option("--noisy", ev_noisy, "noisy image directory (compare mode, optional)");
    ev->add_option("--matcher", ev_matcher, "matcher checkpoint (model mode)");
    ev->add_option("--refiner", ev_refiner);
    ev->add_option("--stage", ev_stage);
    ev->add_option("--sigma", ev_sigma);
    ev->add_flag("--blind", ev_blind);
    ev->add_option("--window", ev_window);
    ev->add_option("--csv", ev_csv, "write the report as CSV");
    ev->add_option("--out-dir", ev_out_dir, "write denoised images (model mode)");

    // ablate
    auto* ab = app.add_subcommand("ablate", "stage-1 PSNR and time per search-window radius");
    std::string ab_data, ab_matcher, ab_csv;
    std::vector<int> ab_radii{7, 11, 15};
    std::optional<double> ab_sigma;
    ab->add_option("--data", ab_data, "clean validation directory")->required();
    ab->add_option("--matcher", ab_matcher)->required();
    ab->add_option("--radii", ab_radii)->delimiter(',');
    ab->add_option("--sigma", ab_sigma);
    ab->add_option("--csv", ab_csv);

    // dump-scores
    auto* ds = app.add_subcommand("dump-scores", "write per-reference score maps as PNG");
    std::string ds_in, ds_matcher, ds_out = ".", ds_select = "mean";
    std::vector<std::string> ds_refs;
    std::optional<double> ds_sigma;
    std::optional<int> ds_window;
    int ds_zoom = 8;
    ds->add_option("--input", ds_in)->required();
    ds->add_option("--matcher", ds_matcher)->required();
    ds->add_option("--ref", ds_refs, "reference top-left row,col (repeatable)")->required();
    ds->add_option("--window", ds_window);
    ds->add_option("--select", ds_select, "mean | scale:N | group:N");
    ds->add_option("--zoom", ds_zoom);
    ds->add_option("--sigma", ds_sigma, "add noise of this level to the input first");
    ds->add_option("--out", ds_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        Settings s = load_settings(common);

        if (synth->parsed()) {
            if (synth_count) s.corpus.count = *synth_count;
            if (synth_val) s.corpus.val_count = *synth_val;
            if (synth_size) s.corpus.size = *synth_size;
            if (synth_kind) s.corpus.kind = parse_corpus_kind(*synth_kind);
            if (common.seed) s.corpus.seed = *common.seed;
            s.validate();
            write_corpus(synth_corpus(s.corpus), synth_out);
            out << fmt::format("wrote {} train and {} val images to {}\n", s.corpus.count, s.corpus.val_count,
                               synth_out);
        } else if (tmatch->parsed()) {
            apply_noise_flags(s, tm_sigma, tm_blind);
            if (tm_pre) s.schedule.pretrain_steps = *tm_pre;
            if (tm_fine) s.schedule.finetune_steps = *tm_fine;
            if (tm_select) s.schedule.select_on_val = true;
            s.validate();
            std::vector<Image> train, val;
            training_data(s, tm_data, train, val);
            const auto result = train_matcher(s, train, val, !tm_no_pretrain);
            save_matcher(tm_out, result.matcher);
            if (!tm_log.empty())
                write_text(tm_log, "stage,step,loss,lr\n" + loss_csv(result.pretrain, "pretrain") +
                                       loss_csv(result.finetune, "finetune"));
            out << fmt::format("pretrain {} steps {:.1f} s, finetune {} steps {:.1f} s", result.pretrain.loss.size(),
                               result.pretrain.seconds, result.finetune.loss.size(), result.finetune.seconds);
            if (result.finetune.best_step >= 0)
                out << fmt::format(", selected step {} (val {:.3f} dB)", result.finetune.best_step,
                                   result.finetune.best_score);
            out << fmt::format("\nwrote {}\n", tm_out);
        } else if (trefine->parsed()) {
            apply_noise_flags(s, tr_sigma, tr_blind);
            if (tr_steps) s.schedule.refine_steps = *tr_steps;
            s.validate();
            const auto matcher = load_matcher(tr_matcher);
            std::vector<Image> train, val;
            training_data(s, tr_data, train, val);
            const auto result = train_refiner(s, train, matcher);
            save_refiner(tr_out, result.refiner, matcher);
            if (!tr_log.empty()) {
                std::string csv = "stage,step,loss\n";
                for (std::size_t i = 0; i < result.log.loss.size(); ++i)
                    csv += fmt::format("refine,{},{:.8g}\n", i, result.log.loss[i]);
                write_text(tr_log, csv);
            }
            out << fmt::format("refine {} steps {:.1f} s\nwrote {}\n", result.log.loss.size(), result.seconds, tr_out);
        } else if (den->parsed()) {
            if (dn_stage) s.denoise.stage = parse_stage(*dn_stage);
            if (dn_window) s.denoise.window_radius = *dn_window;
            apply_noise_flags(s, dn_sigma, dn_blind);
            s.validate();
            const auto matcher = load_matcher(dn_matcher);
            std::optional<Refiner<float>> refiner;
            if (s.denoise.stage == Stage::full) {
                if (dn_refiner.empty()) throw ConfigError("--stage full needs --refiner");
                refiner = load_refiner(dn_refiner, matcher);
            }
            Image input = read_image(dn_in);
            std::optional<Image> clean;
            if (dn_sigma || dn_blind) {
                std::mt19937_64 rng(s.denoise.seed);
                const double sigma = s.denoise.draw_sigma(rng);
                clean = input;
                input = add_noise(input, {sigma, rng()});
                out << fmt::format("added noise sigma={:.3f}\n", sigma);
                if (!dn_noisy_out.empty()) write_image(input, dn_noisy_out);
            }
            if (!dn_clean.empty()) clean = read_image(dn_clean);
            const Image result = denoise(input, matcher, refiner ? &*refiner : nullptr, s.denoise);
            write_image(result, dn_out);
            if (clean)
                out << fmt::format("psnr noisy={:.4f} dB denoised={:.4f} dB gain={:+.4f} dB\n", psnr(*clean, input),
                                   psnr(*clean, result), psnr(*clean, result) - psnr(*clean, input));
        } else if (ev->parsed()) {
            const auto clean = read_image_dir(ev_clean);
            MetricsReport report;
            if (!ev_denoised.empty()) {
                const auto denoised = read_image_dir(ev_denoised);
                std::vector<Image> noisy;
                if (!ev_noisy.empty()) noisy = images_of(read_image_dir(ev_noisy));
                report = evaluate(images_of(clean), noisy, images_of(denoised), names_of(clean));
            } else {
                if (ev_matcher.empty()) throw ConfigError("eval needs --denoised or --matcher");
                if (ev_stage) s.denoise.stage = parse_stage(*ev_stage);
                if (ev_window) s.denoise.window_radius = *ev_window;
                apply_noise_flags(s, ev_sigma, ev_blind);
                s.validate();
                const auto matcher = load_matcher(ev_matcher);
                std::optional<Refiner<float>> refiner;
                if (s.denoise.stage == Stage::full) {
                    if (ev_refiner.empty()) throw ConfigError("--stage full needs --refiner");
                    refiner = load_refiner(ev_refiner, matcher);
                }
                const auto set = make_eval_set(images_of(clean), s.denoise, s.denoise.seed, names_of(clean));
                std::vector<Image> outputs;
                report = evaluate_model(set, matcher, refiner ? &*refiner : nullptr, s.denoise, &outputs);
                if (!ev_out_dir.empty()) {
                    fs::create_directories(ev_out_dir);
                    for (std::size_t i = 0; i < outputs.size(); ++i)
                        write_image(outputs[i], fs::path(ev_out_dir) / (set.names[i] + ".png"));
                }
            }
            out << report.table();
            if (!ev_csv.empty()) write_text(ev_csv, report.csv());
        } else if (ab->parsed()) {
            if (ab_sigma) s.denoise.sigma = *ab_sigma;
            s.validate();
            const auto matcher = load_matcher(ab_matcher);
            const auto clean = read_image_dir(ab_data);
            const auto set = make_eval_set(images_of(clean), s.denoise, s.denoise.seed, names_of(clean));
            const auto rows = ablate_window(matcher, set, ab_radii, s.denoise);
            out << format_ablation(rows);
            if (!ab_csv.empty()) write_text(ab_csv, ablation_csv(rows));
        } else if (ds->parsed()) {
            if (ds_window) s.denoise.window_radius = *ds_window;
            s.validate();
            const auto matcher = load_matcher(ds_matcher);
            Image img = read_image(ds_in);
            if (ds_sigma) img = add_noise(img, {*ds_sigma, s.denoise.seed});
            const auto selector = ScoreSelector::parse(ds_select);
            fs::create_directories(ds_out);
            for (const auto& text : ds_refs) {
                const auto ref = parse_ref(text);
                const auto map = score_map(img, matcher, ref, s.denoise.window_radius, selector);
                const auto path = fs::path(ds_out) / fmt::format("scores_r{}_c{}.png", ref.row, ref.col);
                write_image(score_map_image(map, s.denoise.window_radius, ds_zoom), path);
                out << "wrote " << path.string() << "\n";
            }
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const ContractError& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitContract;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

}  // namespace sbm
