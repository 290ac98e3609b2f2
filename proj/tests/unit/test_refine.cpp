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

#include "../support/oracles.hpp"
#include "sbmatch/error.hpp"
#include "sbmatch/refine.hpp"
#include "test_util.hpp"

using namespace sbm;

namespace {

Refiner<float> perturbed_refiner(std::uint64_t seed, int width = 32) {
    auto r = Refiner<float>::init(RefineArch::build(width), seed);
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<float> n(0.0f, 0.05f);
    for (auto& e : r.params.entries())
        for (auto& v : e.value) v += n(rng);
    return r;
}

Image crop(const Image& im, int r0, int c0, int h, int w) {
    Image out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < kChannels; ++ch) out.at(r, c, ch) = im.at(r0 + r, c0 + c, ch);
    return out;
}

Image box_blur(const Image& im) {
    Image out(im.height, im.width);
    for (int r = 0; r < im.height; ++r)
        for (int c = 0; c < im.width; ++c)
            for (int ch = 0; ch < kChannels; ++ch) {
                double s = 0.0;
                int n = 0;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int rr = r + dr, cc = c + dc;
                        if (rr < 0 || cc < 0 || rr >= im.height || cc >= im.width) continue;
                        s += im.at(rr, cc, ch);
                        ++n;
                    }
                out.at(r, c, ch) = static_cast<float>(s / n);
            }
    return out;
}

}  // namespace

TEST_CASE("architecture: seven dilated layers, six inputs, three outputs") {
    const auto arch = RefineArch::build(16);
    std::vector<int> dil;
    int relus = 0;
    for (const auto& l : arch.net.layers) {
        if (l.kind == nn::LayerKind::conv2d) dil.push_back(l.dilation);
        relus += l.kind == nn::LayerKind::relu;
    }
    CHECK(dil == std::vector<int>{1, 2, 3, 4, 3, 2, 1});
    CHECK(relus == 6);
    CHECK(arch.net.in_channels == 6);
    CHECK(arch.net.layers.back().kind == nn::LayerKind::conv2d);
    CHECK(arch.net.layers.back().out_channels == kChannels);
    CHECK(arch.net.layers.back().zero_init);
    const auto back = RefineArch::from_manifest(arch.manifest());
    CHECK(back.manifest() == arch.manifest());
    CHECK(back.width == 16);
    CHECK_THROWS_AS(RefineArch::from_manifest(MatcherArch::build().manifest()), FormatError);
}

TEST_CASE("zero-initialized final layer returns stage1 exactly") {
    const auto r = Refiner<float>::init(RefineArch::build(), 1);
    const auto noisy = test::random_image(20, 24, 2), stage1 = test::random_image(20, 24, 3);
    const auto out = refine_forward(noisy, stage1, r);
    CHECK(out.data == stage1.data);
}

TEST_CASE("output shape equals input shape") {
    const auto r = perturbed_refiner(4, 8);
    for (const auto& [h, w] : {std::pair{17, 23}, std::pair{1, 1}, std::pair{5, 16}, std::pair{16, 16}}) {
        const auto out = refine_forward(test::random_image(h, w, 5), test::random_image(h, w, 6), r);
        CHECK(out.height == h);
        CHECK(out.width == w);
    }
}

TEST_CASE("mismatched inputs are rejected") {
    const auto r = Refiner<float>::init(RefineArch::build(8), 1);
    CHECK_THROWS_AS(refine_forward(test::random_image(17, 23, 1), test::random_image(17, 22, 1), r), ContractError);
    Refiner<float> rr = r;
    std::vector<RefineSample> empty;
    CHECK_THROWS_AS(train_refine(empty, rr, {}), ContractError);
}

TEST_CASE("refiner gradients agree with directional finite differences") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        auto g = oracle::refiner_problem(4, 12, 13, seed);
        for (const auto& r : oracle::directional_check(g.loss, g.backprop, g.params, seed)) {
            INFO(r.name << " seed " << seed << " analytic=" << r.analytic << " numeric=" << r.numeric);
            CHECK(r.rel_error < 1e-4);
        }
    }
}

TEST_CASE("refiner per-coordinate gradient check") {
    nn::GradCheckOptions opts;
    opts.step = 1e-5;
    opts.max_probes_per_entry = 40;
    // Per-coordinate differences carry ReLU kinks and cancellation near 1e-4;
    // the directional check holds the 1e-4 bound.
    opts.tolerance = 1e-3;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto rep = oracle::refiner_grad_check(4, 12, 13, seed, opts);
        INFO(rep.summary());
        CHECK(rep.passed);
    }
}

TEST_CASE("training on one image reduces the loss") {
    const auto clean = test::random_image(32, 32, 7, 30.0f, 220.0f);
    const auto noisy = add_noise(clean, {25.0, 8});
    const std::vector<RefineSample> data{{clean, noisy, box_blur(noisy)}};
    Refiner<float> r = Refiner<float>::init(RefineArch::build(16), 9);
    RefineSchedule s;
    s.steps = 200;
    s.crop = 0;
    s.batch = 1;
    s.seed = 10;
    const auto log = train_refine(data, r, s);
    REQUIRE(log.loss.size() == 200);
    INFO("first " << log.loss.front() << " last " << log.loss.back());
    CHECK(log.loss.back() < 0.8 * log.loss.front());
}

TEST_CASE("perfect stage1 keeps the residual at zero") {
    const auto clean = test::random_image(32, 32, 11, 30.0f, 220.0f);
    const std::vector<RefineSample> data{{clean, add_noise(clean, {25.0, 12}), clean}};
    Refiner<float> r = Refiner<float>::init(RefineArch::build(16), 13);
    RefineSchedule s;
    s.steps = 50;
    s.crop = 24;
    s.batch = 2;
    const auto log = train_refine(data, r, s);
    CHECK(log.loss.front() < 1e-10);
    double wmax = 0.0;
    for (float v : r.params.at("d7.weight").value) wmax = std::max(wmax, std::abs(static_cast<double>(v)));
    CHECK(wmax < 1e-6);
}

TEST_CASE("translation covariance outside the receptive band") {
    // The receptive radius is the sum of the dilations, 16; pixels closer to
    // the border see zero padding and are excluded.
    const int band = 16;
    const auto r = perturbed_refiner(14);
    const auto big_noisy = test::random_image(80, 80, 15), big_stage1 = test::random_image(80, 80, 16);
    const int h = 60, w = 60, dr = 6, dc = 9;
    const auto a = refine_forward(crop(big_noisy, 0, 0, h, w), crop(big_stage1, 0, 0, h, w), r);
    const auto b = refine_forward(crop(big_noisy, dr, dc, h, w), crop(big_stage1, dr, dc, h, w), r);
    double worst = 0.0;
    int compared = 0;
    for (int y = band; y < h - band; ++y)
        for (int x = band; x < w - band; ++x) {
            const int yb = y - dr, xb = x - dc;
            if (yb < band || xb < band || yb >= h - band || xb >= w - band) continue;
            ++compared;
            for (int ch = 0; ch < kChannels; ++ch)
                worst = std::max(worst, std::abs(static_cast<double>(a.at(y, x, ch)) - b.at(yb, xb, ch)));
        }
    CHECK(compared >= 400);
    CHECK(worst < 1e-5);
}
