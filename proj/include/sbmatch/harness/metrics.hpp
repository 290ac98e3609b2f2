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

// Image quality metrics and the evaluation report.
//
// PSNR = 10 log10(255^2 / MSE) over all values of an image, capped at
// kPsnrCap for identical inputs. SSIM uses an 11x11 Gaussian window
// (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 255, evaluated at every position where
// the window fits inside the image, per channel, then averaged over channels.
// Patch PSNR is taken over the non-overlapping 8x8 tiles of each image and the
// percentile is pooled over the whole set.

#include <string>
#include <utility>
#include <vector>

#include "sbmatch/image.hpp"

namespace sbm {

inline constexpr double kPsnrCap = 100.0;

double mse(const Image& a, const Image& b);
double psnr_from_mse(double mse);
double psnr(const Image& reference, const Image& test);
double ssim(const Image& reference, const Image& test);

// PSNR of every non-overlapping 8x8 patch, row-major.
std::vector<double> patch_psnrs(const Image& reference, const Image& test);

// Linear interpolation between order statistics at position q * (n - 1).
double percentile(std::vector<double> values, double q);

struct MetricsRow {
    std::string name;
    double noisy_psnr = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
    double p25_psnr = 0.0;  // per image
};

struct MetricsReport {
    std::vector<MetricsRow> rows;
    double mean_noisy_psnr = 0.0;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double p25_psnr = 0.0;  // pooled over all patches of the set
    std::vector<std::pair<std::string, double>> timings;  // stage name, seconds

    std::string table() const;
    std::string csv() const;
};

// noisy may be empty; names may be empty (rows are then numbered).
MetricsReport evaluate(const std::vector<Image>& clean, const std::vector<Image>& noisy,
                       const std::vector<Image>& denoised, const std::vector<std::string>& names = {});

}  // namespace sbm
