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

#include "sbmatch/harness/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "sbmatch/error.hpp"

namespace sbm {
namespace {

constexpr int kJitter = 4;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

using Rgb = std::array<float, 3>;

Rgb random_color(std::mt19937_64& rng, float lo = 32.0f, float hi = 224.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    return {std::round(u(rng)), std::round(u(rng)), std::round(u(rng))};
}

Image gradient_background(int size, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> base(96.0f, 160.0f), slope(-48.0f, 48.0f);
    Image img(size, size);
    for (int ch = 0; ch < kChannels; ++ch) {
        const float b = base(rng), gx = slope(rng), gy = slope(rng);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                const float fx = static_cast<float>(c) / size - 0.5f, fy = static_cast<float>(r) / size - 0.5f;
                img.at(r, c, ch) = std::round(b + gx * fx + gy * fy);
            }
    }
    return img;
}

Image random_tile(int t, std::mt19937_64& rng) {
    Image tile(t, t);
    const Rgb bg = random_color(rng);
    for (int r = 0; r < t; ++r)
        for (int c = 0; c < t; ++c)
            for (int ch = 0; ch < kChannels; ++ch) tile.at(r, c, ch) = bg[static_cast<std::size_t>(ch)];
    const int shapes = std::uniform_int_distribution<int>(2, 3)(rng);
    for (int s = 0; s < shapes; ++s) {
        const Rgb col = random_color(rng);
        const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
        const int r0 = std::uniform_int_distribution<int>(0, t - 3)(rng);
        const int c0 = std::uniform_int_distribution<int>(0, t - 3)(rng);
        const int r1 = std::uniform_int_distribution<int>(r0 + 2, t)(rng);
        const int c1 = std::uniform_int_distribution<int>(c0 + 2, t)(rng);
        const float cr = (r0 + r1) / 2.0f, cc = (c0 + c1) / 2.0f;
        const float rad = std::max(1.5f, std::min(r1 - r0, c1 - c0) / 2.0f);
        for (int r = 0; r < t; ++r)
            for (int c = 0; c < t; ++c) {
                bool inside = false;
                if (kind == 0) inside = r >= r0 && r < r1 && c >= c0 && c < c1;
                else if (kind == 1) inside = (r + 0.5f - cr) * (r + 0.5f - cr) + (c + 0.5f - cc) * (c + 0.5f - cc) <= rad * rad;
                else inside = std::abs((r - r0) - (c - c0)) <= 1 && r >= r0 && r < r1;
                if (inside)
                    for (int ch = 0; ch < kChannels; ++ch) tile.at(r, c, ch) = col[static_cast<std::size_t>(ch)];
            }
    }
    return tile;
}

void tiled_texture(SynthImage& out, int size, std::mt19937_64& rng) {
    out.image = gradient_background(size, rng);
    const int t = std::uniform_int_distribution<int>(8, 16)(rng);
    const int cell = t + kJitter;
    const int n = size / cell;
    const int cells = n * n;
    const int n_tiles = cells >= 18 ? 2 : 1;
    for (int i = 0; i < n_tiles; ++i) out.tiles.push_back(random_tile(t, rng));
    std::vector<int> assign(static_cast<std::size_t>(cells));
    for (int i = 0; i < cells; ++i) assign[static_cast<std::size_t>(i)] = i % n_tiles;
    std::shuffle(assign.begin(), assign.end(), rng);
    std::uniform_int_distribution<int> jit(0, kJitter);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            TilePlacement p{assign[static_cast<std::size_t>(a * n + b)], a * cell + jit(rng), b * cell + jit(rng)};
            write_patch(out.image, {p.row, p.col, t}, out.tiles[static_cast<std::size_t>(p.tile)].data);
            out.placements.push_back(p);
        }
}

void repeated_stripe(SynthImage& out, int size, std::mt19937_64& rng) {
    out.image = gradient_background(size, rng);
    const int period = std::uniform_int_distribution<int>(8, 16)(rng);
    const int orient = std::uniform_int_distribution<int>(0, 2)(rng);
    std::vector<Rgb> profile(static_cast<std::size_t>(period));
    const int bands = std::uniform_int_distribution<int>(2, 3)(rng);
    std::vector<int> cuts{0};
    for (int i = 1; i < bands; ++i) cuts.push_back(std::uniform_int_distribution<int>(1, period - 1)(rng));
    std::sort(cuts.begin(), cuts.end());
    std::vector<Rgb> band_colors;
    for (int i = 0; i < bands; ++i) band_colors.push_back(random_color(rng));
    for (int k = 0; k < period; ++k) {
        int band = 0;
        for (int i = 0; i < bands; ++i)
            if (k >= cuts[static_cast<std::size_t>(i)]) band = i;
        profile[static_cast<std::size_t>(k)] = band_colors[static_cast<std::size_t>(band)];
    }
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const int proj = orient == 0 ? r : orient == 1 ? c : r + c;
            const auto& col = profile[static_cast<std::size_t>(proj % period)];
            for (int ch = 0; ch < kChannels; ++ch) {
                float& v = out.image.at(r, c, ch);
                v = std::round(0.35f * v + 0.65f * col[static_cast<std::size_t>(ch)]);
            }
        }
}

}  // namespace

std::vector<Image> Corpus::train_images() const {
    std::vector<Image> out;
    for (const auto& s : train) out.push_back(s.image);
    return out;
}

std::vector<Image> Corpus::val_images() const {
    std::vector<Image> out;
    for (const auto& s : val) out.push_back(s.image);
    return out;
}

SynthImage synth_image(int size, CorpusKind kind, std::uint64_t seed) {
    SBM_REQUIRE(size >= 32, "synth_image: size must be >= 32");
    std::mt19937_64 rng(seed);
    if (kind == CorpusKind::mixed)
        kind = std::bernoulli_distribution(0.5)(rng) ? CorpusKind::tiled_texture : CorpusKind::repeated_stripe;
    SynthImage out;
    out.kind = kind;
    if (kind == CorpusKind::tiled_texture) tiled_texture(out, size, rng);
    else repeated_stripe(out, size, rng);
    return out;
}

Corpus synth_corpus(const CorpusSpec& spec) {
    spec.validate();
    Corpus c;
    for (int i = 0; i < spec.count; ++i)
        c.train.push_back(synth_image(spec.size, spec.kind, mix_seed(spec.seed, static_cast<std::uint64_t>(i))));
    for (int i = 0; i < spec.val_count; ++i)
        c.val.push_back(
            synth_image(spec.size, spec.kind, mix_seed(spec.seed, static_cast<std::uint64_t>(spec.count + i))));
    return c;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    for (const auto& [sub, set] : {std::pair{"train", &corpus.train}, std::pair{"val", &corpus.val}}) {
        const auto d = dir / sub;
        std::error_code ec;
        std::filesystem::create_directories(d, ec);
        if (ec) throw IoError(d.string(), "cannot create directory: " + ec.message());
        for (std::size_t i = 0; i < set->size(); ++i)
            write_image((*set)[i].image, d / fmt::format("{:03}.png", i));
    }
}

std::vector<NamedImage> read_image_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError(dir.string(), "not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".png" || ext == ".ppm")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError(dir.string(), "no .png or .ppm images");
    std::vector<NamedImage> out;
    for (const auto& f : files) out.push_back({f.stem().string(), read_image(f)});
    return out;
}

}  // namespace sbm
