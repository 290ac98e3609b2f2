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

#include "sbmatch/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "sbmatch/error.hpp"

namespace sbm {
namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> t{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double x = i - kSsimWindow / 2;
        t[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
        sum += t[static_cast<std::size_t>(i)];
    }
    for (auto& v : t) v /= sum;
    return t;
}

// Valid-mode separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w) {
    static const auto taps = gaussian_taps();
    const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += taps[static_cast<std::size_t>(k)] * plane[static_cast<std::size_t>(r) * w + c + k];
            tmp[static_cast<std::size_t>(r) * ow + c] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += taps[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(r + k) * ow + c];
            out[static_cast<std::size_t>(r) * ow + c] = s;
        }
    return out;
}

void require_same(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b) || a.data.size() != b.data.size())
        throw ContractError(fmt::format("{}: image dimensions differ ({}x{} vs {}x{})", what, a.height, a.width,
                                        b.height, b.width));
}

}  // namespace

double mse(const Image& a, const Image& b) {
    require_same(a, b, "mse");
    SBM_REQUIRE(!a.data.empty(), "mse: empty image");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.data.size());
}

double psnr_from_mse(double m) {
    if (m <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / m));
}

double psnr(const Image& reference, const Image& test) { return psnr_from_mse(mse(reference, test)); }

double ssim(const Image& reference, const Image& test) {
    require_same(reference, test, "ssim");
    const int h = reference.height, w = reference.width;
    SBM_REQUIRE(h >= kSsimWindow && w >= kSsimWindow, "ssim: image smaller than the 11x11 window");
    const std::size_t n = static_cast<std::size_t>(h) * w;
    double total = 0.0;
    for (int ch = 0; ch < kChannels; ++ch) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = reference.data[i * kChannels + ch];
            y[i] = test.data[i * kChannels + ch];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = filter_valid(x, h, w), my = filter_valid(y, h, w);
        const auto sxx = filter_valid(xx, h, w), syy = filter_valid(yy, h, w), sxy = filter_valid(xy, h, w);
        double acc = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cxy = sxy[i] - mx[i] * my[i];
            acc += ((2.0 * mx[i] * my[i] + kC1) * (2.0 * cxy + kC2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
        }
        total += acc / static_cast<double>(mx.size());
    }
    return total / kChannels;
}

std::vector<double> patch_psnrs(const Image& reference, const Image& test) {
    require_same(reference, test, "patch_psnrs");
    std::vector<double> out;
    for (int r = 0; r + kPatchSize <= reference.height; r += kPatchSize)
        for (int c = 0; c + kPatchSize <= reference.width; c += kPatchSize) {
            double s = 0.0;
            for (int dr = 0; dr < kPatchSize; ++dr)
                for (int dc = 0; dc < kPatchSize; ++dc)
                    for (int ch = 0; ch < kChannels; ++ch) {
                        const double d = static_cast<double>(reference.at(r + dr, c + dc, ch)) - test.at(r + dr, c + dc, ch);
                        s += d * d;
                    }
            out.push_back(psnr_from_mse(s / kPatchValues));
        }
    return out;
}

double percentile(std::vector<double> values, double q) {
    SBM_REQUIRE(!values.empty(), "percentile: no values");
    SBM_REQUIRE(q >= 0.0 && q <= 1.0, "percentile: q must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

MetricsReport evaluate(const std::vector<Image>& clean, const std::vector<Image>& noisy,
                       const std::vector<Image>& denoised, const std::vector<std::string>& names) {
    SBM_REQUIRE(!clean.empty(), "evaluate: empty set");
    SBM_REQUIRE(clean.size() == denoised.size(), "evaluate: clean and denoised sets differ in size");
    SBM_REQUIRE(noisy.empty() || noisy.size() == clean.size(), "evaluate: clean and noisy sets differ in size");
    SBM_REQUIRE(names.empty() || names.size() == clean.size(), "evaluate: name count mismatch");
    MetricsReport rep;
    std::vector<double> pooled;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        MetricsRow row;
        row.name = names.empty() ? fmt::format("{:03}", i) : names[i];
        row.psnr = psnr(clean[i], denoised[i]);
        row.ssim = ssim(clean[i], denoised[i]);
        if (!noisy.empty()) row.noisy_psnr = psnr(clean[i], noisy[i]);
        auto patches = patch_psnrs(clean[i], denoised[i]);
        row.p25_psnr = percentile(patches, 0.25);
        pooled.insert(pooled.end(), patches.begin(), patches.end());
        rep.rows.push_back(row);
    }
    const double n = static_cast<double>(rep.rows.size());
    for (const auto& r : rep.rows) {
        rep.mean_psnr += r.psnr / n;
        rep.mean_ssim += r.ssim / n;
        rep.mean_noisy_psnr += r.noisy_psnr / n;
    }
    rep.p25_psnr = percentile(std::move(pooled), 0.25);
    return rep;
}

std::string MetricsReport::table() const {
    std::string out = fmt::format("{:<24} {:>10} {:>10} {:>8} {:>10}\n", "image", "noisy_dB", "psnr_dB", "ssim",
                                  "p25_dB");
    for (const auto& r : rows)
        out += fmt::format("{:<24} {:>10.4f} {:>10.4f} {:>8.5f} {:>10.4f}\n", r.name, r.noisy_psnr, r.psnr, r.ssim,
                           r.p25_psnr);
    out += fmt::format("{:<24} {:>10.4f} {:>10.4f} {:>8.5f} {:>10.4f}\n", "mean", mean_noisy_psnr, mean_psnr,
                       mean_ssim, p25_psnr);
    for (const auto& [stage, sec] : timings) out += fmt::format("time {:<19} {:>10.3f} s\n", stage, sec);
    return out;
}

std::string MetricsReport::csv() const {
    std::string out = "image,noisy_psnr,psnr,ssim,p25_psnr\n";
    for (const auto& r : rows)
        out += fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.name, r.noisy_psnr, r.psnr, r.ssim, r.p25_psnr);
    out += fmt::format("mean,{:.6f},{:.6f},{:.6f},{:.6f}\n", mean_noisy_psnr, mean_psnr, mean_ssim, p25_psnr);
    for (const auto& [stage, sec] : timings) out += fmt::format("time:{},,{:.6f},,\n", stage, sec);
    return out;
}

}  // namespace sbm
