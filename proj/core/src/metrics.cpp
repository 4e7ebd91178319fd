#include "cupgan/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "cupgan/errors.hpp"

namespace cupgan::metrics {

namespace {

void check_same_size(const RgbImage& a, const RgbImage& b, const char* who) {
    if (!a.same_size(b)) {
        throw ShapeError(std::string(who) + ": dimension mismatch " + std::to_string(a.height) +
                         "x" + std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                         std::to_string(b.width));
    }
}

void check_min_size(const RgbImage& a, int min_side, const char* who) {
    if (a.height < min_side || a.width < min_side) {
        throw ShapeError(std::string(who) + ": image must be at least " +
                         std::to_string(min_side) + "x" + std::to_string(min_side));
    }
}

// ITU-R BT.601 luminance of an 8-bit image, kept on the 0..255 scale.
Plane luminance(const RgbImage& img) {
    Plane y(img.height, img.width);
    const std::size_t n = y.values.size();
    for (std::size_t i = 0; i < n; ++i) {
        y.values[i] = 0.299 * img.pixels[3 * i] + 0.587 * img.pixels[3 * i + 1] +
                      0.114 * img.pixels[3 * i + 2];
    }
    return y;
}

std::vector<double> gaussian_kernel_2d(int n, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(n) * n);
    const double c = (n - 1) / 2.0;
    double sum = 0.0;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double dy = y - c, dx = x - c;
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k[static_cast<std::size_t>(y) * n + x] = v;
            sum += v;
        }
    }
    for (auto& v : k) v /= sum;
    return k;
}

// 'valid' cross-correlation of a plane with an n x n kernel.
Plane filter_valid(const Plane& img, const std::vector<double>& kernel, int n) {
    Plane out(img.height - n + 1, img.width - n + 1);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            double s = 0.0;
            for (int ky = 0; ky < n; ++ky) {
                const double* row = &img.values[static_cast<std::size_t>(y + ky) * img.width + x];
                const double* krow = &kernel[static_cast<std::size_t>(ky) * n];
                for (int kx = 0; kx < n; ++kx) s += row[kx] * krow[kx];
            }
            out.at(y, x) = s;
        }
    }
    return out;
}

Plane decimate2(const Plane& img) {
    Plane out((img.height + 1) / 2, (img.width + 1) / 2);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) out.at(y, x) = img.at(2 * y, 2 * x);
    }
    return out;
}

Plane multiply(const Plane& a, const Plane& b) {
    Plane out(a.height, a.width);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = a.values[i] * b.values[i];
    return out;
}

}  // namespace

double mse(const RgbImage& a, const RgbImage& b) {
    check_same_size(a, b, "mse");
    const std::size_t n = a.pixels.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(n);
}

double psnr(const RgbImage& a, const RgbImage& b) {
    const double e = mse(a, b);
    if (e == 0.0) return kPsnrCap;
    return 10.0 * std::log10(255.0 * 255.0 / e);
}

double ssim(const RgbImage& a, const RgbImage& b) {
    check_same_size(a, b, "ssim");
    check_min_size(a, 11, "ssim");
    constexpr int kWin = 11;
    constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
    const std::vector<double> w = gaussian_kernel_2d(kWin, 1.5);
    const Plane ya = luminance(a);
    const Plane yb = luminance(b);
    double total = 0.0;
    long count = 0;
    for (int y0 = 0; y0 + kWin <= ya.height; ++y0) {
        for (int x0 = 0; x0 + kWin <= ya.width; ++x0) {
            double mu1 = 0.0, mu2 = 0.0, e11 = 0.0, e22 = 0.0, e12 = 0.0;
            for (int ky = 0; ky < kWin; ++ky) {
                for (int kx = 0; kx < kWin; ++kx) {
                    const double wv = w[static_cast<std::size_t>(ky) * kWin + kx];
                    const double p = ya.at(y0 + ky, x0 + kx);
                    const double q = yb.at(y0 + ky, x0 + kx);
                    mu1 += wv * p;
                    mu2 += wv * q;
                    // Grouped so the expression is bitwise symmetric in (p,q).
                    e11 += wv * (p * p);
                    e22 += wv * (q * q);
                    e12 += wv * (p * q);
                }
            }
            const double s11 = e11 - mu1 * mu1;
            const double s22 = e22 - mu2 * mu2;
            const double s12 = e12 - mu1 * mu2;
            const double num = (2.0 * mu1 * mu2 + kC1) * (2.0 * s12 + kC2);
            const double den = (mu1 * mu1 + mu2 * mu2 + kC1) * (s11 + s22 + kC2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double uqi(const RgbImage& a, const RgbImage& b) {
    check_same_size(a, b, "uqi");
    constexpr int kWin = 8;
    check_min_size(a, kWin, "uqi");
    const Plane ya = luminance(a);
    const Plane yb = luminance(b);
    const double inv_n = 1.0 / (kWin * kWin);
    double total = 0.0;
    long count = 0;
    bool identical = true;
    for (std::size_t i = 0; i < a.pixels.size() && identical; ++i) {
        identical = a.pixels[i] == b.pixels[i];
    }
    for (int y0 = 0; y0 + kWin <= ya.height; ++y0) {
        for (int x0 = 0; x0 + kWin <= ya.width; ++x0) {
            double mu1 = 0.0, mu2 = 0.0, e11 = 0.0, e22 = 0.0, e12 = 0.0;
            for (int ky = 0; ky < kWin; ++ky) {
                for (int kx = 0; kx < kWin; ++kx) {
                    const double p = ya.at(y0 + ky, x0 + kx);
                    const double q = yb.at(y0 + ky, x0 + kx);
                    mu1 += inv_n * p;
                    mu2 += inv_n * q;
                    e11 += inv_n * p * p;
                    e22 += inv_n * q * q;
                    e12 += inv_n * p * q;
                }
            }
            const double s11 = e11 - mu1 * mu1;
            const double s22 = e22 - mu2 * mu2;
            const double s12 = e12 - mu1 * mu2;
            const double num = (2.0 * mu1 * mu2) * (2.0 * s12);
            const double den = (mu1 * mu1 + mu2 * mu2) * (s11 + s22);
            if (den == 0.0) continue;  // contrast- and mean-free windows carry no signal
            total += num / den;
            ++count;
        }
    }
    if (count == 0) return identical ? 1.0 : 0.0;
    return total / static_cast<double>(count);
}

double vif(const RgbImage& reference, const RgbImage& distorted) {
    check_same_size(reference, distorted, "vif");
    check_min_size(reference, 32, "vif");
    constexpr double kNoiseVar = 2.0;
    constexpr double kTiny = 1e-10;
    Plane ref = luminance(reference);
    Plane dist = luminance(distorted);
    double num = 0.0, den = 0.0;
    for (int scale = 1; scale <= 4; ++scale) {
        const int n = (1 << (4 - scale + 1)) + 1;  // 17, 9, 5, 3
        const std::vector<double> win = gaussian_kernel_2d(n, n / 5.0);
        if (scale > 1) {
            if (ref.height < n || ref.width < n) break;
            ref = decimate2(filter_valid(ref, win, n));
            dist = decimate2(filter_valid(dist, win, n));
        }
        if (ref.height < n || ref.width < n) continue;
        const Plane mu1 = filter_valid(ref, win, n);
        const Plane mu2 = filter_valid(dist, win, n);
        const Plane e11 = filter_valid(multiply(ref, ref), win, n);
        const Plane e22 = filter_valid(multiply(dist, dist), win, n);
        const Plane e12 = filter_valid(multiply(ref, dist), win, n);
        for (std::size_t i = 0; i < mu1.values.size(); ++i) {
            const double m1 = mu1.values[i], m2 = mu2.values[i];
            double s1 = e11.values[i] - m1 * m1;
            double s2 = e22.values[i] - m2 * m2;
            const double s12 = e12.values[i] - m1 * m2;
            if (s1 < 0.0) s1 = 0.0;
            if (s2 < 0.0) s2 = 0.0;
            double g, sv;
            if (s1 < kTiny) {
                g = 0.0;
                sv = s2;
            } else if (s2 < kTiny) {
                g = 0.0;
                sv = 0.0;
            } else {
                g = s12 / s1;
                sv = s2 - g * s12;
                if (g < 0.0) {
                    sv = s2;
                    g = 0.0;
                }
                if (sv < 0.0) sv = 0.0;
            }
            num += std::log2(1.0 + g * g * s1 / (sv + kNoiseVar));
            den += std::log2(1.0 + s1 / kNoiseVar);
        }
    }
    if (den == 0.0) return num == 0.0 ? 1.0 : 0.0;
    return num / den;
}

MetricReport evaluate_set(const std::vector<std::pair<RgbImage, RgbImage>>& pairs) {
    if (pairs.empty()) throw DataError("evaluate_set: empty pair list");
    MetricReport sum;
    for (const auto& [pred, truth] : pairs) {
        sum.mse += mse(pred, truth);
        sum.psnr += psnr(pred, truth);
        sum.ssim += ssim(pred, truth);
        sum.uqi += uqi(pred, truth);
        sum.vif += vif(truth, pred);
    }
    const double inv = 1.0 / static_cast<double>(pairs.size());
    return {sum.psnr * inv, sum.ssim * inv, sum.mse * inv, sum.uqi * inv, sum.vif * inv};
}

std::string format_table(const MetricReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "PSNR  %.4f\n"
                  "SSIM  %.4f\n"
                  "MSE   %.4f\n"
                  "UQI   %.4f\n"
                  "VIF   %.4f\n",
                  r.psnr, r.ssim, r.mse, r.uqi, r.vif);
    return buf;
}

std::string format_kv(const MetricReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "psnr=%.9g\nssim=%.9g\nmse=%.9g\nuqi=%.9g\nvif=%.9g\n",
                  r.psnr, r.ssim, r.mse, r.uqi, r.vif);
    return buf;
}

}  // namespace cupgan::metrics
