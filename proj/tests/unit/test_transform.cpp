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

#include <cmath>
#include <random>

#include "sbmatch/error.hpp"
#include "sbmatch/transform.hpp"
#include "test_util.hpp"

using namespace sbm;

namespace {

template <class T>
double energy(std::span<const T> v) {
    double s = 0.0;
    for (T x : v) s += static_cast<double>(x) * static_cast<double>(x);
    return s;
}

double group_energy(const SubbandCoeffs<double>& c, int g) { return energy<double>(c.group(g)); }

}  // namespace

TEST_CASE("group table layout") {
    const auto& table = group_table();
    int total = 0;
    for (int g = 0; g < kNumGroups; ++g) {
        const auto& info = table[static_cast<std::size_t>(g)];
        CHECK(info.offset == total);
        total += info.size;
        if (g < 27) {
            CHECK(info.channel == g / 9);
            CHECK(info.scale == (g % 9) / 3);
            CHECK(info.size == (info.scale == 0 ? 1 : info.scale == 1 ? 4 : 16));
            CHECK(static_cast<int>(info.orientation) == g % 3);
        } else {
            CHECK(info.channel == g - 27);
            CHECK(info.size == 1);
            CHECK(info.orientation == Orientation::scaling);
        }
    }
    CHECK(total == kPatchValues);
    const auto& slots = coefficient_groups();
    for (int g = 0; g < kNumGroups; ++g) {
        const auto& info = table[static_cast<std::size_t>(g)];
        for (int i = info.offset; i < info.offset + info.size; ++i) CHECK(slots[static_cast<std::size_t>(i)] == g);
    }
}

TEST_CASE("default color matrix") {
    const auto m = default_color_matrix();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += m[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * m[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            CHECK(std::abs(s - (i == j ? 1.0 : 0.0)) < 1e-15);
        }
    const double v = 7.0;
    for (int i = 0; i < 3; ++i) {
        const auto& row = m[static_cast<std::size_t>(i)];
        const double gray = (row[0] + row[1] + row[2]) * v;
        CHECK(gray == doctest::Approx(i == 0 ? std::sqrt(3.0) * v : 0.0));
    }
    CHECK(m[0][0] == doctest::Approx(1 / std::sqrt(3.0)));
    CHECK(m[1][0] == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(m[2][0] == doctest::Approx(1 / std::sqrt(6.0)));
}

TEST_CASE("constant patch maps to the channel-0 scaling coefficient") {
    std::vector<double> ones(kPatchValues, 1.0);
    const auto c = analyze<double>(ones);
    for (int g = 0; g < kNumGroups; ++g) {
        const auto grp = c.group(g);
        if (g == 27) CHECK(grp[0] == doctest::Approx(8.0 * std::sqrt(3.0)).epsilon(1e-14));
        else
            for (double v : grp) CHECK(std::abs(v) < 1e-13);
    }
    SubbandCoeffs<double> dc;
    dc.group(27)[0] = 8.0 * std::sqrt(3.0);
    for (double v : synthesize(dc)) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("zero patch and zero coefficients") {
    std::vector<double> zero(kPatchValues, 0.0);
    for (double v : analyze<double>(zero).values) CHECK(v == 0.0);
    for (double v : synthesize(SubbandCoeffs<double>{})) CHECK(v == 0.0);
}

TEST_CASE("perfect reconstruction and energy identity") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
        const auto p = test::random_vector<double>(kPatchValues, rng, -300, 300);
        const auto c = analyze<double>(p);
        const auto back = synthesize(c);
        double worst = 0.0;
        for (int i = 0; i < kPatchValues; ++i) worst = std::max(worst, std::abs(back[static_cast<std::size_t>(i)] - p[static_cast<std::size_t>(i)]));
        CHECK(worst < 1e-10);
        double ge = 0.0;
        for (int g = 0; g < kNumGroups; ++g) ge += group_energy(c, g);
        CHECK(std::abs(ge - energy<double>(p)) / energy<double>(p) < 1e-12);

        const auto pf = test::random_vector<float>(kPatchValues, rng, 0, 255);
        const auto cf = analyze<float>(pf);
        CHECK(std::abs(energy<float>(cf.values) - energy<float>(pf)) / energy<float>(pf) < 1e-6);
        const auto bf = synthesize(cf);
        for (int i = 0; i < kPatchValues; ++i) CHECK(std::abs(bf[static_cast<std::size_t>(i)] - pf[static_cast<std::size_t>(i)]) < 1e-3f);
    }
}

TEST_CASE("white noise stays white in every group") {
    const double sigma = 10.0;
    const int draws = 100000;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<double> sq(kPatchValues, 0.0);
    std::vector<double> p(kPatchValues), c(kPatchValues);
    for (int d = 0; d < draws; ++d) {
        for (auto& v : p) v = n(rng);
        analyze<double>(p, c);
        for (int i = 0; i < kPatchValues; ++i) sq[static_cast<std::size_t>(i)] += c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < kPatchValues; ++i) {
        const double var = sq[static_cast<std::size_t>(i)] / draws;
        INFO("slot " << i);
        CHECK(std::abs(var - sigma * sigma) < 0.05 * sigma * sigma);
    }
}

TEST_CASE("a horizontal step edge lands in the H groups") {
    // Intensity changes along x only: the edge is crossed moving along columns.
    std::vector<double> p(kPatchValues);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            for (int ch = 0; ch < 3; ++ch) p[static_cast<std::size_t>((r * 8 + c) * 3 + ch)] = c < 3 ? 40.0 + ch : 200.0 - ch;
    const auto co = analyze<double>(p);
    double h = 0.0, v = 0.0, d = 0.0;
    for (int g = 0; g < 27; ++g) {
        const auto o = group_table()[static_cast<std::size_t>(g)].orientation;
        (o == Orientation::horizontal ? h : o == Orientation::vertical ? v : d) += group_energy(co, g);
    }
    CHECK(h > 0.0);
    CHECK(h > 10.0 * d);
    CHECK(v < 1e-18 + 1e-12 * h);
}

TEST_CASE("contract violations") {
    std::vector<double> short_patch(100), coeffs(kPatchValues);
    CHECK_THROWS_AS(analyze<double>(short_patch, coeffs), ContractError);
    CHECK_THROWS_AS(synthesize<double>(coeffs, short_patch), ContractError);
    TransformSpec bad;
    bad.color_matrix[0][0] = 1.0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    TransformSpec deep;
    deep.levels = 2;
    CHECK_THROWS_AS(deep.validate(), ContractError);
    CHECK_NOTHROW(TransformSpec{}.validate());
}
