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

// Procedural corpora with controllable self-similarity.
//
// tiled-texture: a smooth color gradient overlaid with copies of one or two
// random 8-16 px tiles, one per grid cell, each placed with up to 4 px of
// positional jitter. Copies are pixel-exact.
// repeated-stripe: a periodic color profile (period 8-16 px, horizontal,
// vertical or diagonal) blended with a smooth gradient.
// mixed: each image picks one of the two kinds.
//
// Values are integral gray levels so images survive a PNG round trip. Image k
// of the set is generated from its own stream derived from (seed, k); the
// first `count` indices form the training split and the next `val_count` the
// validation split.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sbmatch/harness/config.hpp"
#include "sbmatch/image.hpp"

namespace sbm {

struct TilePlacement {
    int tile = 0;
    int row = 0;
    int col = 0;
};

struct SynthImage {
    Image image;
    CorpusKind kind = CorpusKind::tiled_texture;
    std::vector<Image> tiles;               // tiled-texture only
    std::vector<TilePlacement> placements;  // tiled-texture only
};

struct Corpus {
    std::vector<SynthImage> train;
    std::vector<SynthImage> val;

    std::vector<Image> train_images() const;
    std::vector<Image> val_images() const;
};

SynthImage synth_image(int size, CorpusKind kind, std::uint64_t seed);
Corpus synth_corpus(const CorpusSpec& spec);

// Writes <dir>/train/NNN.png and <dir>/val/NNN.png.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

struct NamedImage {
    std::string name;
    Image image;
};

// All .png / .ppm files of a directory, sorted by file name.
std::vector<NamedImage> read_image_dir(const std::filesystem::path& dir);

}  // namespace sbm
