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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "sbmatch/error.hpp"
#include "sbmatch/harness/cli.hpp"
#include "sbmatch/harness/config.hpp"
#include "sbmatch/harness/corpus.hpp"
#include "sbmatch/harness/metrics.hpp"
#include "sbmatch/harness/pipeline.hpp"
#include "sbmatch/harness/train.hpp"
#include "sbmatch/nn/checkpoint.hpp"
#include "test_util.hpp"

using namespace sbm;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "sbmatch");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliResult r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Small settings shared by the CLI and pipeline tests.
const std::vector<std::string> kTiny = {
    "--set", "corpus_count=4",      "--set", "corpus_val=2",          "--set", "corpus_size=40",
    "--set", "pretrain_steps=12",   "--set", "finetune_steps=6",      "--set", "train_window_radius=3",
    "--set", "matcher_width1=4",    "--set", "matcher_width2=6",      "--set", "matcher_width3=8",
    "--set", "feature_dim=8",       "--set", "compare_width=12",      "--set", "refine_width=4",
    "--set", "refine_steps=6",      "--set", "refine_images=2",       "--set", "refine_crop=24",
    "--set", "window_radius=3",     "--set", "pretrain_crop=24"};

Settings tiny_settings() {
    Settings s;
    for (std::size_t i = 0; i + 1 < kTiny.size(); i += 2) {
        const auto& kv = kTiny[i + 1];
        const auto eq = kv.find('=');
        set_setting(s, kv.substr(0, eq), kv.substr(eq + 1));
    }
    s.validate();
    return s;
}

std::vector<std::string> with_tiny(std::vector<std::string> head, const std::vector<std::string>& tail = {}) {
    head.insert(head.end(), kTiny.begin(), kTiny.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
}

// A synthetic corpus on disk with a trained tiny matcher and refiner.
struct Workspace {
    fs::path dir, data, matcher, refiner;

    Workspace() {
        dir = test::scratch_dir("harness_ws");
        data = dir / "data";
        matcher = dir / "m.ckpt";
        refiner = dir / "r.ckpt";
        REQUIRE(cli(with_tiny({"synth", "--out", data.string()})).code == 0);
        const auto tm = cli(with_tiny({"train-match", "--data", data.string(), "--out", matcher.string()}));
        REQUIRE_MESSAGE(tm.code == 0, tm.err);
        const auto tr = cli(with_tiny({"train-refine", "--data", data.string(), "--matcher", matcher.string(), "--out",
                                       refiner.string()}));
        REQUIRE_MESSAGE(tr.code == 0, tr.err);
    }
};

const Workspace& workspace() {
    static const Workspace ws;
    return ws;
}

Image constant(int h, int w, float v) { return Image(h, w, v); }

}  // namespace

// ---------------------------------------------------------------- metrics

TEST_CASE("psnr worked examples") {
    CHECK(psnr(constant(16, 16, 10), constant(16, 16, 11)) == doctest::Approx(48.1308).epsilon(1e-3 / 48.13));
    CHECK(psnr_from_mse(1.0) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-14));
    CHECK(mse(constant(9, 7, 100), constant(9, 7, 105)) == 25.0);
    CHECK(psnr(constant(9, 7, 100), constant(9, 7, 105)) == doctest::Approx(34.1514).epsilon(1e-5));
    const auto img = test::random_image(20, 20, 1);
    CHECK(psnr(img, img) >= kPsnrCap);
    CHECK_THROWS_AS(psnr(constant(8, 8, 0), constant(8, 9, 0)), ContractError);
}

TEST_CASE("ssim of identical images is one and of constants follows the luminance term") {
    const auto img = test::random_image(30, 25, 2);
    CHECK(std::abs(ssim(img, img) - 1.0) < 1e-9);
    const double c1 = std::pow(0.01 * 255, 2);
    const double expect = (2 * 80.0 * 120.0 + c1) / (80.0 * 80.0 + 120.0 * 120.0 + c1);
    CHECK(ssim(constant(20, 20, 80), constant(20, 20, 120)) == doctest::Approx(expect).epsilon(1e-12));
    const double s_low = ssim(img, add_noise(img, {5.0, 3}));
    const double s_high = ssim(img, add_noise(img, {40.0, 3}));
    CHECK(s_low < 1.0);
    CHECK(s_high < s_low);
    CHECK(s_high > 0.0);
    CHECK_THROWS_AS(ssim(constant(8, 8, 0), constant(8, 9, 0)), ContractError);
}

TEST_CASE("pooled 25th-percentile patch psnr matches a hand computation") {
    // Two 16x32 images, eight patches each; the left half of the first carries
    // a constant error of 1 and the right half 2, the second 4 and 8.
    auto make = [](float d1, float d2) {
        Image clean = constant(16, 32, 100), test = clean;
        for (int r = 0; r < 16; ++r)
            for (int c = 0; c < 32; ++c)
                for (int ch = 0; ch < kChannels; ++ch) test.at(r, c, ch) += c < 16 ? d1 : d2;
        return std::pair{clean, test};
    };
    const auto [c1, t1] = make(1, 2);
    const auto [c2, t2] = make(4, 8);
    auto p = [](double d) { return 10.0 * std::log10(255.0 * 255.0 / (d * d)); };
    // 16 pooled values, four each of p(8) < p(4) < p(2) < p(1); q = 0.25 sits at index 3.75.
    const double expect = p(8) + 0.75 * (p(4) - p(8));
    const auto report = evaluate({c1, c2}, {}, {t1, t2});
    CHECK(report.p25_psnr == doctest::Approx(expect).epsilon(1e-12));
    CHECK(report.rows.size() == 2);
    CHECK(patch_psnrs(c1, t1).size() == 8);
    CHECK(percentile({4.0, 1.0, 3.0, 2.0}, 0.5) == 2.5);
    CHECK(percentile({7.0}, 0.25) == 7.0);
}

TEST_CASE("report renders as table and csv") {
    const auto a = test::random_image(16, 16, 4);
    const auto r = evaluate({a}, {add_noise(a, {10, 1})}, {a}, {"x"});
    CHECK(r.table().find("x") != std::string::npos);
    CHECK(r.csv().find("image,") == 0);
    CHECK(r.mean_ssim == doctest::Approx(1.0));
}

// ----------------------------------------------------------------- config

TEST_CASE("config files parse, override and reject errors") {
    const auto file = ConfigFile::parse("# comment\nwindow_radius = 9\n\nsigma=40 # trailing\nsigma_mode = blind\n");
    Settings s;
    apply_config(file, s);
    CHECK(s.denoise.window_radius == 9);
    CHECK(s.denoise.sigma == 40.0);
    CHECK(s.denoise.sigma_mode == SigmaMode::blind);
    set_setting(s, "window_radius", "11");
    CHECK(s.denoise.window_radius == 11);

    CHECK_THROWS_AS(ConfigFile::parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse("just words\n"), ConfigError);
    CHECK_THROWS_AS(set_setting(s, "no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(set_setting(s, "window_radius", "abc"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::load("/nonexistent/cfg.txt"), IoError);
    for (const auto& k : settings_keys()) CHECK(format_settings(s).find(k) != std::string::npos);
}

TEST_CASE("config invariants") {
    Settings s;
    s.validate();
    CHECK(s.denoise.context_size == s.denoise.patch_size + 8);
    s.denoise.window_radius = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = Settings{};
    s.denoise.sigma_mode = SigmaMode::blind;
    s.denoise.blind_low = 30;
    s.denoise.blind_high = 30;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = Settings{};
    s.schedule.lr_milestones = {0.5, 1.5};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = Settings{};
    s.schedule.finetune_steps = -1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("learning rate after both drops is 1e-4") {
    TrainSchedule t;
    const int n = t.finetune_steps;
    const auto ms = t.milestone_steps(n);
    REQUIRE(ms.size() == 2);
    for (int m : ms) {
        CHECK(m > 0);
        CHECK(m < n);
    }
    CHECK(t.lr_at(0, n) == 1e-3);
    CHECK(t.lr_at(ms[0], n) == doctest::Approx(1e-3 * kLrDropFactor).epsilon(1e-15));
    CHECK(t.lr_at(ms[0] - 1, n) == 1e-3);
    CHECK(t.lr_at(n - 1, n) == doctest::Approx(1e-4).epsilon(1e-15));
}

TEST_CASE("blind sigma draws are uniform on [0, 55]") {
    DenoiseConfig c;
    c.sigma_mode = SigmaMode::blind;
    std::mt19937_64 rng(5);
    std::vector<double> xs(1000);
    for (auto& x : xs) x = c.draw_sigma(rng);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = xs[i] / 55.0;
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / 1000.0), std::abs(f - static_cast<double>(i + 1) / 1000.0)});
    }
    CHECK(xs.front() >= 0.0);
    CHECK(xs.back() <= 55.0);
    CHECK(ks < 1.36 / std::sqrt(1000.0));
    DenoiseConfig f;
    CHECK(f.draw_sigma(rng) == 25.0);
}

// ----------------------------------------------------------------- corpus

TEST_CASE("tiled textures repeat every tile at least nine times") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const auto s = synth_image(96, CorpusKind::tiled_texture, seed);
        REQUIRE_FALSE(s.tiles.empty());
        std::vector<int> counts(s.tiles.size(), 0);
        for (const auto& p : s.placements) {
            ++counts[static_cast<std::size_t>(p.tile)];
            const auto& tile = s.tiles[static_cast<std::size_t>(p.tile)];
            bool same = true;
            for (int r = 0; r < tile.height; ++r)
                for (int c = 0; c < tile.width; ++c)
                    for (int ch = 0; ch < kChannels; ++ch)
                        same = same && s.image.at(p.row + r, p.col + c, ch) == tile.at(r, c, ch);
            CHECK(same);
        }
        for (int c : counts) CHECK(c >= 9);
    }
}

TEST_CASE("corpus is deterministic, split and calibrated") {
    CorpusSpec spec;
    spec.count = 12;
    spec.val_count = 4;
    const auto a = synth_corpus(spec), b = synth_corpus(spec);
    REQUIRE(a.train.size() == 12);
    REQUIRE(a.val.size() == 4);
    for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].image.data == b.train[i].image.data);
    std::set<std::vector<float>> distinct;
    for (const auto& s : a.train) distinct.insert(s.image.data);
    for (const auto& s : a.val) distinct.insert(s.image.data);
    CHECK(distinct.size() == 16);
    spec.seed = 2;
    CHECK(synth_corpus(spec).train[0].image.data != a.train[0].image.data);

    for (auto kind : {CorpusKind::tiled_texture, CorpusKind::repeated_stripe, CorpusKind::mixed}) {
        CorpusSpec k;
        k.kind = kind;
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& s : synth_corpus(k).train)
            for (float v : s.image.data) {
                sum += v;
                ++n;
            }
        const double mean = sum / static_cast<double>(n);
        INFO(to_string(kind) << " mean " << mean);
        CHECK(mean >= 96.0);
        CHECK(mean <= 160.0);
    }
    CorpusSpec bad;
    bad.size = 24;
    CHECK_THROWS_AS(synth_corpus(bad), ConfigError);
}

TEST_CASE("corpus round-trips through a directory") {
    CorpusSpec spec;
    spec.count = 3;
    spec.val_count = 2;
    spec.size = 32;
    const auto c = synth_corpus(spec);
    const auto dir = test::scratch_dir("corpus_rt");
    write_corpus(c, dir);
    const auto train = read_image_dir(dir / "train");
    REQUIRE(train.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(train[i].image.same_shape(c.train[i].image));
        for (std::size_t k = 0; k < train[i].image.size(); ++k)
            CHECK(train[i].image.data[k] == static_cast<float>(quantize(c.train[i].image.data[k])));
    }
    CHECK_THROWS_AS(read_image_dir(dir / "missing"), IoError);
}

// --------------------------------------------------------------- training

TEST_CASE("pre-training loss falls from the first to the last decile") {
    const auto s = tiny_settings();
    CorpusSpec spec = s.corpus;
    spec.size = 48;
    const auto imgs = synth_corpus(spec).train_images();
    auto m = Matcher<float>::init(MatcherArch::build(s.matcher), 3);
    TrainSchedule t = s.schedule;
    t.pretrain_steps = 300;
    const auto log = pretrain_match(imgs, s.denoise, t, m, 4);
    REQUIRE(log.loss.size() == 300);
    auto mean = [&](std::size_t a, std::size_t b) {
        return std::accumulate(log.loss.begin() + static_cast<std::ptrdiff_t>(a),
                               log.loss.begin() + static_cast<std::ptrdiff_t>(b), 0.0) / static_cast<double>(b - a);
    };
    INFO("first " << mean(0, 30) << " last " << mean(270, 300));
    CHECK(mean(270, 300) < mean(0, 30));
}

TEST_CASE("pre-training on identical aligned tiles drives scores above 0.8") {
    const auto tile = test::random_image(8, 8, 21, 40.0f, 215.0f);
    auto tiled = [&](int n) {
        Image img(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                for (int ch = 0; ch < kChannels; ++ch) img.at(r, c, ch) = tile.at(r % 8, c % 8, ch);
        return img;
    };
    const std::vector<Image> corpus(4, tiled(32));
    auto s = tiny_settings();
    auto m = Matcher<float>::init(MatcherArch::build(s.matcher), 5);
    s.schedule.pretrain_steps = 400;
    s.schedule.pretrain_crop = 0;
    pretrain_match(corpus, s.denoise, s.schedule, m, 6);

    const auto noisy = add_noise(tiled(48), {25.0, 7});
    const ImageScorer scorer(noisy, m);
    std::vector<PatchRef> members;
    for (int r = 8; r <= 32; r += 8)
        for (int c = 8; c <= 32; c += 8)
            if (r != 16 || c != 16) members.push_back({r, c, kPatchSize});
    std::vector<float> out(members.size() * kNumGroups);
    scorer.score({16, 16, kPatchSize}, members, out);
    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
    INFO("mean aligned score " << mean);
    CHECK(mean > 0.8);

    // Misaligned members (offsets not a multiple of the period) score lower.
    std::vector<PatchRef> off;
    for (int r = 11; r <= 29; r += 6)
        for (int c = 13; c <= 31; c += 6) off.push_back({r, c, kPatchSize});
    std::vector<float> out_off(off.size() * kNumGroups);
    scorer.score({16, 16, kPatchSize}, off, out_off);
    const double mean_off = std::accumulate(out_off.begin(), out_off.end(), 0.0) / static_cast<double>(out_off.size());
    INFO("mean misaligned score " << mean_off);
    CHECK(mean_off < mean);
}

TEST_CASE("blind training draws sigma across the whole range") {
    auto s = tiny_settings();
    s.denoise.sigma_mode = SigmaMode::blind;
    s.schedule.pretrain_steps = 60;
    CorpusSpec spec = s.corpus;
    const auto imgs = synth_corpus(spec).train_images();
    auto m = Matcher<float>::init(MatcherArch::build(s.matcher), 3);
    const auto log = pretrain_match(imgs, s.denoise, s.schedule, m, 4);
    REQUIRE(log.sigmas.size() >= 200);
    const auto [lo, hi] = std::minmax_element(log.sigmas.begin(), log.sigmas.end());
    CHECK(*lo < 5.0);
    CHECK(*hi > 50.0);
}

TEST_CASE("validation selection restores the best checkpoint") {
    auto s = tiny_settings();
    s.schedule.finetune_steps = 7;
    s.schedule.val_every = 2;
    s.schedule.select_on_val = true;
    const auto imgs = synth_corpus(s.corpus).train_images();
    auto m = Matcher<float>::init(MatcherArch::build(s.matcher), 3);
    // Checks run after steps 2, 4, 6 and at the end (7); the second is best.
    const std::vector<double> scores{1.0, 5.0, 2.0, 3.0};
    std::vector<std::uint64_t> digests;
    const ValidationFn fake = [&](const Matcher<float>& mm) {
        digests.push_back(nn::params_digest(mm.params));
        return scores[digests.size() - 1];
    };
    const auto log = finetune_match(imgs, s.denoise, s.schedule, m, 9, fake);
    REQUIRE(digests.size() == 4);
    CHECK(log.best_step == 4);
    CHECK(log.best_score == 5.0);
    CHECK(nn::params_digest(m.params) == digests[1]);
    CHECK(digests[1] != digests[3]);
}

TEST_CASE("pipeline is deterministic for a fixed seed") {
    const auto s = tiny_settings();
    CorpusSpec spec = s.corpus;
    const auto corpus = synth_corpus(spec);
    const auto train = corpus.train_images(), val = corpus.val_images();
    auto run = [&] {
        const auto mt = train_matcher(s, train, val);
        const auto rt = train_refiner(s, train, mt.matcher);
        const auto set = make_eval_set(val, s.denoise, 77);
        return evaluate_model(set, mt.matcher, &rt.refiner, s.denoise);
    };
    const auto a = run(), b = run();
    REQUIRE(a.rows.size() == b.rows.size());
    CHECK(a.mean_psnr == b.mean_psnr);
    CHECK(a.mean_ssim == b.mean_ssim);
    CHECK(a.p25_psnr == b.p25_psnr);
    for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].psnr == b.rows[i].psnr);
}

TEST_CASE("window ablation reports one row per radius with growing runtime") {
    const auto& ws = workspace();
    const auto m = load_matcher(ws.matcher);
    auto s = tiny_settings();
    std::vector<Image> clean;
    for (const auto& n : read_image_dir(ws.data / "val")) clean.push_back(n.image);
    const auto set = make_eval_set(clean, s.denoise, 3);
    const std::vector<int> radii{2, 6, 12};
    const auto rows = ablate_window(m, set, radii, s.denoise);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].radius == radii[i]);
    CHECK(rows[0].seconds < rows[1].seconds);
    CHECK(rows[1].seconds < rows[2].seconds);
    CHECK(format_ablation(rows).find("12") != std::string::npos);
}

TEST_CASE("score selectors and score maps") {
    std::vector<float> v(kNumGroups);
    for (int g = 0; g < kNumGroups; ++g) v[static_cast<std::size_t>(g)] = static_cast<float>(g) / 29.0f;
    CHECK(ScoreSelector::parse("group:4").reduce(v) == v[4]);
    CHECK(ScoreSelector::parse("mean").reduce(v) == doctest::Approx(0.5));
    // scale:3 selects the scaling coefficients (groups 27..29).
    CHECK(ScoreSelector::parse("scale:3").reduce(v) == doctest::Approx((v[27] + v[28] + v[29]) / 3.0));
    CHECK(ScoreSelector::parse("scale:0").reduce(v) == doctest::Approx((v[0] + v[1] + v[2] + v[9] + v[10] + v[11] + v[18] + v[19] + v[20]) / 9.0));
    CHECK_THROWS_AS(ScoreSelector::parse("group:30"), ConfigError);
    CHECK_THROWS_AS(ScoreSelector::parse("median"), ConfigError);

    const auto m = Matcher<float>::init(MatcherArch::build(tiny_settings().matcher), 1);
    const auto img = test::random_image(24, 24, 2);
    const auto map = score_map(img, m, {0, 0, kPatchSize}, 3, ScoreSelector{});
    REQUIRE(map.size() == 49u);
    CHECK(map[3 * 7 + 3] == 1.0f);
    CHECK(map[0] == -1.0f);
    CHECK(map[3 * 7 + 4] >= 0.0f);
    const auto pic = score_map_image(map, 3, 4);
    CHECK(pic.height == 28);
    CHECK(pic.width == 28);
}

// ------------------------------------------------------------ checkpoints

TEST_CASE("model files round-trip and the refiner is tied to its matcher") {
    const auto& ws = workspace();
    const auto m = load_matcher(ws.matcher);
    const auto r = load_refiner(ws.refiner, m);
    const auto dir = test::scratch_dir("ckpt_tie");
    save_matcher(dir / "m2.ckpt", m);
    CHECK(nn::params_digest(load_matcher(dir / "m2.ckpt").params) == nn::params_digest(m.params));

    auto other = m;
    other.params.entries().front().value[0] += 0.5f;
    CHECK_THROWS_AS(load_refiner(ws.refiner, other), FormatError);
    CHECK_THROWS_AS(load_matcher(ws.refiner), FormatError);
    CHECK_THROWS_AS(load_refiner(ws.matcher, m), FormatError);
    (void)r;
}

// -------------------------------------------------------------------- cli

TEST_CASE("cli usage errors and help") {
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({}).code == 2);
    CHECK(cli({"denoise", "--bogus"}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
}

TEST_CASE("cli config errors exit 3") {
    const auto dir = test::scratch_dir("cli_cfg");
    std::ofstream(dir / "bad.cfg") << "window_radius = 9\nnot a setting line\n";
    const auto r = cli({"--config", (dir / "bad.cfg").string(), "synth", "--out", (dir / "x").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("bad.cfg") != std::string::npos);
    CHECK(cli({"--set", "nope=1", "synth", "--out", (dir / "x").string()}).code == 3);
    CHECK(cli({"--set", "window_radius", "synth", "--out", (dir / "x").string()}).code == 3);
    std::ofstream(dir / "ok.cfg") << "corpus_count = 2\ncorpus_val = 1\ncorpus_size = 32\n";
    const auto ok = cli({"--config", (dir / "ok.cfg").string(), "--set", "corpus_count=3", "synth", "--out", (dir / "y").string()});
    CHECK(ok.code == 0);
    CHECK(read_image_dir(dir / "y" / "train").size() == 3);
    CHECK(read_image_dir(dir / "y" / "val").size() == 1);
}

TEST_CASE("denoise without a checkpoint names the missing file") {
    const auto dir = test::scratch_dir("cli_missing");
    write_image(test::random_image(24, 24, 1), dir / "in.png");
    const auto r = cli({"denoise", "--input", (dir / "in.png").string(), "--output", (dir / "out.png").string(),
                        "--matcher", (dir / "nope.ckpt").string(), "--stage", "match"});
    CHECK(r.code == 4);
    CHECK(r.err.find("nope.ckpt") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out.png"));
}

TEST_CASE("denoise with a checkpoint writes the image and a psnr line") {
    const auto& ws = workspace();
    const auto dir = test::scratch_dir("cli_denoise");
    const auto clean = read_image_dir(ws.data / "val").front();
    const auto noisy = add_noise(clean.image, {25.0, 4});
    write_image(noisy, dir / "noisy.png");
    const auto r = cli({"denoise", "--input", (dir / "noisy.png").string(), "--output", (dir / "out.png").string(),
                        "--matcher", ws.matcher.string(), "--stage", "match", "--window", "3", "--clean",
                        (ws.data / "val" / (clean.name + ".png")).string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::exists(dir / "out.png"));
    CHECK(r.out.find("psnr noisy=") != std::string::npos);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);

    const auto full = cli({"denoise", "--input", (ws.data / "val" / (clean.name + ".png")).string(), "--output",
                           (dir / "full.png").string(), "--matcher", ws.matcher.string(), "--refiner",
                           ws.refiner.string(), "--sigma", "25", "--window", "3"});
    REQUIRE_MESSAGE(full.code == 0, full.err);
    CHECK(full.out.find("added noise sigma=25") != std::string::npos);
    CHECK(full.out.find("gain=") != std::string::npos);

    const auto no_ref = cli({"denoise", "--input", (dir / "noisy.png").string(), "--output", (dir / "x.png").string(),
                             "--matcher", ws.matcher.string(), "--stage", "full"});
    CHECK(no_ref.code != 0);
}

TEST_CASE("eval on identical directories reports ssim 1") {
    const auto& ws = workspace();
    const auto dir = test::scratch_dir("cli_eval");
    const auto r = cli({"eval", "--clean", (ws.data / "val").string(), "--denoised", (ws.data / "val").string(),
                        "--csv", (dir / "r.csv").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    std::ifstream f(dir / "r.csv");
    std::string header, line;
    std::getline(f, header);
    int rows = 0;
    while (std::getline(f, line)) {
        if (line.rfind("mean", 0) == 0 || line.rfind("time:", 0) == 0 || line.empty()) continue;
        ++rows;
        CHECK(line.find(",1.000000") != std::string::npos);
    }
    CHECK(rows == 2);
    const auto model = cli({"eval", "--clean", (ws.data / "val").string(), "--matcher", ws.matcher.string(),
                            "--refiner", ws.refiner.string(), "--window", "3"});
    CHECK(model.code == 0);
    CHECK(cli({"eval", "--clean", (ws.data / "val").string()}).code != 0);
}

TEST_CASE("ablate and dump-scores subcommands") {
    const auto& ws = workspace();
    const auto dir = test::scratch_dir("cli_ablate");
    const auto a = cli({"ablate", "--data", (ws.data / "val").string(), "--matcher", ws.matcher.string(), "--radii",
                        "2,4", "--csv", (dir / "a.csv").string()});
    REQUIRE_MESSAGE(a.code == 0, a.err);
    std::ifstream f(dir / "a.csv");
    int lines = 0;
    for (std::string l; std::getline(f, l);) ++lines;
    CHECK(lines == 3);

    const auto input = ws.data / "val" / "000.png";
    const auto d = cli({"dump-scores", "--input", input.string(), "--matcher", ws.matcher.string(), "--ref", "4,5",
                        "--ref", "10,10", "--window", "3", "--zoom", "2", "--select", "scale:1", "--out",
                        (dir / "maps").string()});
    REQUIRE_MESSAGE(d.code == 0, d.err);
    const auto pic = read_image(dir / "maps" / "scores_r4_c5.png");
    CHECK(pic.height == 14);
    CHECK(fs::exists(dir / "maps" / "scores_r10_c10.png"));
    const auto bad = cli({"dump-scores", "--input", input.string(), "--matcher", ws.matcher.string(), "--ref", "400,5",
                          "--out", (dir / "maps").string()});
    CHECK(bad.code == 6);
}

TEST_CASE("retraining the matcher invalidates the refiner") {
    const auto& ws = workspace();
    const auto dir = test::scratch_dir("cli_retrain");
    const auto m2 = dir / "m2.ckpt";
    REQUIRE(cli(with_tiny({"--seed", "99", "train-match", "--data", ws.data.string(), "--out", m2.string()})).code == 0);
    const auto r = cli({"denoise", "--input", (ws.data / "val" / "000.png").string(), "--output",
                        (dir / "o.png").string(), "--matcher", m2.string(), "--refiner", ws.refiner.string()});
    CHECK(r.code == 5);
    CHECK(r.err.find("different matcher") != std::string::npos);
}
