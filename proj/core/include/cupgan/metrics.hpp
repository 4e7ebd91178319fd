#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cupgan/image.hpp"

namespace cupgan::metrics {

// PSNR is capped at 99.0 dB for identical images (mse == 0).
inline constexpr double kPsnrCap = 99.0;

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double mse = 0.0;
    double uqi = 0.0;
    double vif = 0.0;
};

// Mean squared 8-bit difference over all pixels and channels.
double mse(const RgbImage& a, const RgbImage& b);

// 10*log10(255^2 / mse), capped at kPsnrCap when mse == 0.
double psnr(const RgbImage& a, const RgbImage& b);

// Mean local SSIM on the BT.601 luminance plane: 11x11 Gaussian window
// (sigma 1.5), K1=0.01, K2=0.03, dynamic range 255, all valid positions.
double ssim(const RgbImage& a, const RgbImage& b);

// SSIM with both stabilizers zero and an 8x8 uniform sliding window;
// zero-denominator windows are skipped from the mean.
double uqi(const RgbImage& a, const RgbImage& b);

// Pixel-domain multi-scale visual information fidelity, 4 scales, noise
// variance 2. Directional: the reference image comes first.
double vif(const RgbImage& reference, const RgbImage& distorted);

// Arithmetic mean of each metric over (prediction, ground-truth) pairs,
// accumulated in list order. Throws DataError on an empty list.
MetricReport evaluate_set(const std::vector<std::pair<RgbImage, RgbImage>>& pairs);

std::string format_table(const MetricReport& r);
std::string format_kv(const MetricReport& r);

}  // namespace cupgan::metrics
