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

// Images, noise synthesis, patch and context extraction, search windows and
// patch re-assembly.
//
// Layout: an Image holds height*width*3 floats, row-major, channel-interleaved
// (index = (row * width + col) * 3 + channel). Values are gray levels on the
// [0, 255] scale but are not clamped; only write_image quantizes.
//
// Context patches (16x16) are cut from the image after half-sample symmetric
// padding by 4 pixels on each side: padded coordinate -1 maps to 0, -4 to 3,
// H to H-1. A context is centered on its 8x8 patch, so the context of the patch
// at (r, c) starts at (r, c) in padded coordinates.

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace sbm {

inline constexpr int kChannels = 3;
inline constexpr int kPatchSize = 8;
inline constexpr int kContextSize = 16;
inline constexpr int kContextPad = (kContextSize - kPatchSize) / 2;
inline constexpr int kPatchValues = kPatchSize * kPatchSize * kChannels;        // 192
inline constexpr int kContextValues = kContextSize * kContextSize * kChannels;  // 768

struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, float fill = 0.0f);

    float& at(int r, int c, int ch) { return data[(static_cast<std::size_t>(r) * width + c) * kChannels + ch]; }
    float at(int r, int c, int ch) const {
        return data[(static_cast<std::size_t>(r) * width + c) * kChannels + ch];
    }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

struct NoiseModel {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

struct PatchRef {
    int row = 0;
    int col = 0;
    int size = kPatchSize;

    friend bool operator==(const PatchRef&, const PatchRef&) = default;
};

struct SearchWindow {
    PatchRef center;
    int radius = 0;
    std::vector<PatchRef> members;
};

Image read_image(const std::filesystem::path& path);

// Clamps to [0, 255], rounds half up, writes PNG or binary PPM by extension.
void write_image(const Image& image, const std::filesystem::path& path);

std::uint8_t quantize(float v);

// Adds i.i.d. N(0, sigma^2) to every value; deterministic in noise.seed. No clipping.
Image add_noise(const Image& image, const NoiseModel& noise);

// Pads by `pad` pixels on each side with half-sample symmetric reflection.
Image reflect_pad(const Image& image, int pad);

// Copies the size x size x 3 square at ref. Size-8 refs are taken from the
// image itself; size-16 refs name a context by its 8x8 patch's top-left and are
// read from the reflect-padded image.
std::vector<float> extract_patch(const Image& image, const PatchRef& ref);

// Context of the 8x8 patch at (row, col), read from an image already padded by
// kContextPad. Writes kContextValues floats.
void extract_context(const Image& padded, int row, int col, std::span<float> out);

// Writes an 8x8 (or any size) raster back into the image at ref.
void write_patch(Image& image, const PatchRef& ref, std::span<const float> raster);

// Number of valid 8x8 top-left positions along a dimension of length n.
inline int patch_positions(int n) { return n >= kPatchSize ? n - kPatchSize + 1 : 0; }

// Members of the window around (row, col): all valid 8x8 top-lefts with
// offsets in [-radius, radius]^2 excluding the center, clipped at borders,
// in row-major order.
std::vector<PatchRef> window_members(int height, int width, int row, int col, int radius);

// One window per reference on the stride grid (stride 1 = every patch).
std::vector<SearchWindow> enumerate_windows(const Image& image, int radius, int stride);

// Per-pixel mean over all estimates covering the pixel.
Image assemble_image(std::span<const std::pair<PatchRef, std::vector<float>>> estimates, int height,
                     int width);

// Streaming form of assemble_image used by the denoiser.
class PatchAccumulator {
public:
    PatchAccumulator(int height, int width);
    void add(int row, int col, std::span<const float> raster);
    Image finish() const;

private:
    int height_, width_;
    std::vector<double> sum_;
    std::vector<std::uint32_t> count_;
};

}  // namespace sbm
