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

#include "sbmatch/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "sbmatch/error.hpp"

namespace sbm {

Image::Image(int h, int w, float fill)
    : height(h), width(w), data(static_cast<std::size_t>(h) * w * kChannels, fill) {
    SBM_REQUIRE(h >= 0 && w >= 0, "Image: negative dimensions");
}

namespace {

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return ext;
}

Image from_bytes(int h, int w, const std::vector<std::uint8_t>& rgb) {
    Image img(h, w);
    std::transform(rgb.begin(), rgb.end(), img.data.begin(),
                   [](std::uint8_t b) { return static_cast<float>(b); });
    return img;
}

std::vector<std::uint8_t> to_bytes(const Image& image) {
    std::vector<std::uint8_t> rgb(image.data.size());
    std::transform(image.data.begin(), image.data.end(), rgb.begin(), quantize);
    return rgb;
}

Image read_png(const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw IoError(path.string(), std::string("cannot decode PNG: ") + png.message);
    if (png.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&png);
        throw IoError(path.string(), "unsupported bit depth (only 8-bit PNG is accepted)");
    }
    if (png.format & PNG_FORMAT_FLAG_ALPHA) {
        png_image_free(&png);
        throw IoError(path.string(), "unsupported channel count (alpha channel present)");
    }
    png.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, rgb.data(), 0, nullptr))
        throw IoError(path.string(), std::string("cannot decode PNG: ") + png.message);
    return from_bytes(static_cast<int>(png.height), static_cast<int>(png.width), rgb);
}

void write_png(const Image& image, const std::filesystem::path& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    const auto rgb = to_bytes(image);
    if (!png_image_write_to_file(&png, path.c_str(), 0, rgb.data(), 0, nullptr))
        throw IoError(path.string(), std::string("cannot write PNG: ") + png.message);
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open file");
    if (ppm_token(in) != "P6") throw IoError(path.string(), "not a binary PPM (P6)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(ppm_token(in));
        h = std::stoi(ppm_token(in));
        maxval = std::stoi(ppm_token(in));
    } catch (const std::exception&) {
        throw IoError(path.string(), "malformed PPM header");
    }
    if (w <= 0 || h <= 0) throw IoError(path.string(), "malformed PPM dimensions");
    if (maxval != 255) throw IoError(path.string(), "unsupported bit depth (maxval must be 255)");
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * kChannels);
    in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(rgb.size()))
        throw IoError(path.string(), "truncated PPM pixel data");
    return from_bytes(h, w, rgb);
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open file for writing");
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    const auto rgb = to_bytes(image);
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

int reflect_index(int p, int n) {
    // Half-sample symmetric: ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
    while (p < 0 || p >= n) {
        if (p < 0) p = -p - 1;
        if (p >= n) p = 2 * n - p - 1;
    }
    return p;
}

}  // namespace

std::uint8_t quantize(float v) {
    const float clamped = std::clamp(v, 0.0f, 255.0f);
    return static_cast<std::uint8_t>(std::floor(clamped + 0.5f));
}

Image read_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError(path.string(), "file does not exist");
    const std::string ext = lower_extension(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".ppm") return read_ppm(path);
    throw IoError(path.string(), "unsupported file extension (expected .png or .ppm)");
}

void write_image(const Image& image, const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".png") return write_png(image, path);
    if (ext == ".ppm") return write_ppm(image, path);
    throw IoError(path.string(), "unsupported file extension (expected .png or .ppm)");
}

Image add_noise(const Image& image, const NoiseModel& noise) {
    SBM_REQUIRE(noise.sigma >= 0.0, "add_noise: sigma must be non-negative");
    Image out = image;
    if (noise.sigma == 0.0) return out;
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> normal(0.0, noise.sigma);
    for (float& v : out.data) v = static_cast<float>(v + normal(rng));
    return out;
}

Image reflect_pad(const Image& image, int pad) {
    SBM_REQUIRE(pad >= 0, "reflect_pad: negative pad");
    SBM_REQUIRE(image.height > 0 && image.width > 0, "reflect_pad: empty image");
    Image out(image.height + 2 * pad, image.width + 2 * pad);
    for (int r = 0; r < out.height; ++r) {
        const int sr = reflect_index(r - pad, image.height);
        for (int c = 0; c < out.width; ++c) {
            const int sc = reflect_index(c - pad, image.width);
            for (int ch = 0; ch < kChannels; ++ch) out.at(r, c, ch) = image.at(sr, sc, ch);
        }
    }
    return out;
}

void extract_context(const Image& padded, int row, int col, std::span<float> out) {
    SBM_REQUIRE(out.size() == static_cast<std::size_t>(kContextValues),
                "extract_context: output must hold 16x16x3 values");
    SBM_REQUIRE(row >= 0 && col >= 0 && row + kContextSize <= padded.height &&
                    col + kContextSize <= padded.width,
                "extract_context: context outside padded image");
    const std::size_t row_len = static_cast<std::size_t>(kContextSize) * kChannels;
    for (int r = 0; r < kContextSize; ++r) {
        const float* src = &padded.data[(static_cast<std::size_t>(row + r) * padded.width + col) * kChannels];
        std::copy(src, src + row_len, out.begin() + static_cast<std::ptrdiff_t>(r * row_len));
    }
}

std::vector<float> extract_patch(const Image& image, const PatchRef& ref) {
    SBM_REQUIRE(ref.size == kPatchSize || ref.size == kContextSize,
                "extract_patch: size must be 8 or 16");
    if (ref.size == kContextSize) {
        SBM_REQUIRE(ref.row >= 0 && ref.col >= 0 && ref.row + kPatchSize <= image.height &&
                        ref.col + kPatchSize <= image.width,
                    "extract_patch: context ref names an invalid 8x8 patch");
        const Image padded = reflect_pad(image, kContextPad);
        std::vector<float> out(kContextValues);
        extract_context(padded, ref.row, ref.col, out);
        return out;
    }
    SBM_REQUIRE(ref.row >= 0 && ref.col >= 0 && ref.row + ref.size <= image.height &&
                    ref.col + ref.size <= image.width,
                "extract_patch: ref out of bounds");
    std::vector<float> out(static_cast<std::size_t>(ref.size) * ref.size * kChannels);
    const std::size_t row_len = static_cast<std::size_t>(ref.size) * kChannels;
    for (int r = 0; r < ref.size; ++r) {
        const float* src = &image.data[(static_cast<std::size_t>(ref.row + r) * image.width + ref.col) * kChannels];
        std::copy(src, src + row_len, out.begin() + static_cast<std::ptrdiff_t>(r * row_len));
    }
    return out;
}

void write_patch(Image& image, const PatchRef& ref, std::span<const float> raster) {
    SBM_REQUIRE(raster.size() == static_cast<std::size_t>(ref.size) * ref.size * kChannels,
                "write_patch: raster size mismatch");
    SBM_REQUIRE(ref.row >= 0 && ref.col >= 0 && ref.row + ref.size <= image.height &&
                    ref.col + ref.size <= image.width,
                "write_patch: ref out of bounds");
    const std::size_t row_len = static_cast<std::size_t>(ref.size) * kChannels;
    for (int r = 0; r < ref.size; ++r) {
        std::copy_n(raster.begin() + static_cast<std::ptrdiff_t>(r * row_len), row_len,
                    &image.data[(static_cast<std::size_t>(ref.row + r) * image.width + ref.col) * kChannels]);
    }
}

std::vector<PatchRef> window_members(int height, int width, int row, int col, int radius) {
    SBM_REQUIRE(radius >= 1, "window radius must be >= 1");
    const int max_r = patch_positions(height) - 1;
    const int max_c = patch_positions(width) - 1;
    std::vector<PatchRef> members;
    const int r0 = std::max(0, row - radius), r1 = std::min(max_r, row + radius);
    const int c0 = std::max(0, col - radius), c1 = std::min(max_c, col + radius);
    if (r1 >= r0 && c1 >= c0)
        members.reserve(static_cast<std::size_t>(r1 - r0 + 1) * (c1 - c0 + 1));
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c)
            if (r != row || c != col) members.push_back({r, c, kPatchSize});
    return members;
}

std::vector<SearchWindow> enumerate_windows(const Image& image, int radius, int stride) {
    SBM_REQUIRE(radius >= 1, "enumerate_windows: radius must be >= 1");
    SBM_REQUIRE(stride >= 1, "enumerate_windows: stride must be >= 1");
    std::vector<SearchWindow> windows;
    const int nr = patch_positions(image.height), nc = patch_positions(image.width);
    for (int r = 0; r < nr; r += stride)
        for (int c = 0; c < nc; c += stride)
            windows.push_back({{r, c, kPatchSize}, radius,
                               window_members(image.height, image.width, r, c, radius)});
    return windows;
}

PatchAccumulator::PatchAccumulator(int height, int width)
    : height_(height),
      width_(width),
      sum_(static_cast<std::size_t>(height) * width * kChannels, 0.0),
      count_(static_cast<std::size_t>(height) * width, 0) {}

void PatchAccumulator::add(int row, int col, std::span<const float> raster) {
    SBM_REQUIRE(raster.size() == static_cast<std::size_t>(kPatchValues),
                "PatchAccumulator: raster must be 8x8x3");
    SBM_REQUIRE(row >= 0 && col >= 0 && row + kPatchSize <= height_ && col + kPatchSize <= width_,
                "PatchAccumulator: patch out of bounds");
    for (int r = 0; r < kPatchSize; ++r) {
        for (int c = 0; c < kPatchSize; ++c) {
            const std::size_t px = static_cast<std::size_t>(row + r) * width_ + col + c;
            ++count_[px];
            for (int ch = 0; ch < kChannels; ++ch)
                sum_[px * kChannels + ch] += raster[(r * kPatchSize + c) * kChannels + ch];
        }
    }
}

Image PatchAccumulator::finish() const {
    Image out(height_, width_);
    for (std::size_t px = 0; px < count_.size(); ++px) {
        SBM_REQUIRE(count_[px] > 0, "assemble_image: pixel not covered by any patch estimate");
        for (int ch = 0; ch < kChannels; ++ch)
            out.data[px * kChannels + ch] = static_cast<float>(sum_[px * kChannels + ch] / count_[px]);
    }
    return out;
}

Image assemble_image(std::span<const std::pair<PatchRef, std::vector<float>>> estimates, int height,
                     int width) {
    PatchAccumulator acc(height, width);
    for (const auto& [ref, raster] : estimates) {
        SBM_REQUIRE(ref.size == kPatchSize, "assemble_image: estimates must be 8x8 patches");
        acc.add(ref.row, ref.col, raster);
    }
    return acc.finish();
}

}  // namespace sbm
