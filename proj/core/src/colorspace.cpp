#include "cupgan/colorspace.hpp"

#include <algorithm>
#include <cmath>

#include "cupgan/errors.hpp"

namespace cupgan::colorspace {

namespace {

// D65 reference white, Y normalized to 1.
constexpr double kXn = 0.95047;
constexpr double kYn = 1.00000;
constexpr double kZn = 1.08883;

// Exact CIE rational constants: eps = (6/29)^3, kappa = (29/3)^3.
constexpr double kEps = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

// Linear sRGB -> XYZ (D65) and inverse.
constexpr double kM[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
constexpr double kMinv[3][3] = {
    {3.2404542, -1.5371385, -0.4985314},
    {-0.9692660, 1.8760108, 0.0415560},
    {0.0556434, -0.2040259, 1.0572252},
};

inline double srgb_to_linear(double s) {
    return s > 0.04045 ? std::pow((s + 0.055) / 1.055, 2.4) : s / 12.92;
}

// sRGB companding without clipping: linear branch extends below zero,
// power branch above one.
inline double linear_to_srgb(double u) {
    return u > 0.0031308 ? 1.055 * std::pow(u, 1.0 / 2.4) - 0.055 : 12.92 * u;
}

inline double linear_to_srgb_deriv(double u) {
    return u > 0.0031308 ? (1.055 / 2.4) * std::pow(u, 1.0 / 2.4 - 1.0) : 12.92;
}

inline double lab_f(double t) {
    return t > kEps ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}

inline double lab_f_inv(double ft) {
    const double c = ft * ft * ft;
    return c > kEps ? c : (116.0 * ft - 16.0) / kKappa;
}

inline double lab_f_inv_deriv(double ft) {
    const double c = ft * ft * ft;
    return c > kEps ? 3.0 * ft * ft : 116.0 / kKappa;
}

inline void lab_to_linear_rgb(double L, double a, double b, double lin[3]) {
    const double fy = (L + 16.0) / 116.0;
    const double fx = fy + a / 500.0;
    const double fz = fy - b / 200.0;
    const double yr = L > kKappa * kEps ? fy * fy * fy : L / kKappa;
    const double x = kXn * lab_f_inv(fx);
    const double y = kYn * yr;
    const double z = kZn * lab_f_inv(fz);
    for (int c = 0; c < 3; ++c) {
        lin[c] = kMinv[c][0] * x + kMinv[c][1] * y + kMinv[c][2] * z;
    }
}

}  // namespace

void rgb_pixel_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b,
                      double* L, double* a, double* bb) {
    const double lin[3] = {
        srgb_to_linear(r / 255.0),
        srgb_to_linear(g / 255.0),
        srgb_to_linear(b / 255.0),
    };
    const double x = kM[0][0] * lin[0] + kM[0][1] * lin[1] + kM[0][2] * lin[2];
    const double y = kM[1][0] * lin[0] + kM[1][1] * lin[1] + kM[1][2] * lin[2];
    const double z = kM[2][0] * lin[0] + kM[2][1] * lin[1] + kM[2][2] * lin[2];
    const double fx = lab_f(x / kXn);
    const double fy = lab_f(y / kYn);
    const double fz = lab_f(z / kZn);
    *L = 116.0 * fy - 16.0;
    *a = 500.0 * (fx - fy);
    *bb = 200.0 * (fy - fz);
}

void lab_pixel_to_rgb(double L, double a, double b,
                      std::uint8_t* r, std::uint8_t* g, std::uint8_t* bb) {
    double lin[3];
    lab_to_linear_rgb(L, a, b, lin);
    std::uint8_t* out[3] = {r, g, bb};
    for (int c = 0; c < 3; ++c) {
        const double s = std::clamp(linear_to_srgb(lin[c]), 0.0, 1.0);
        *out[c] = static_cast<std::uint8_t>(std::lround(s * 255.0));
    }
}

LabImage rgb_to_lab(const RgbImage& img) {
    LabImage out(img.height, img.width);
    const std::size_t n = out.L.size();
    for (std::size_t i = 0; i < n; ++i) {
        rgb_pixel_to_lab(img.pixels[3 * i], img.pixels[3 * i + 1], img.pixels[3 * i + 2],
                         &out.L[i], &out.a[i], &out.b[i]);
    }
    return out;
}

RgbImage lab_to_rgb(const LabImage& img) {
    RgbImage out(img.height, img.width);
    const std::size_t n = img.L.size();
    for (std::size_t i = 0; i < n; ++i) {
        lab_pixel_to_rgb(img.L[i], img.a[i], img.b[i],
                         &out.pixels[3 * i], &out.pixels[3 * i + 1], &out.pixels[3 * i + 2]);
    }
    return out;
}

NormalizedLab normalize_lab(const LabImage& img) {
    NormalizedLab out(img.height, img.width);
    const std::size_t n = img.L.size();
    for (std::size_t i = 0; i < n; ++i) {
        out.L_n[i] = img.L[i] / 50.0 - 1.0;
        out.ab_n[i] = img.a[i] / kChromaScale;
        out.ab_n[n + i] = img.b[i] / kChromaScale;
    }
    return out;
}

LabImage denormalize_lab(const NormalizedLab& img) {
    LabImage out(img.height, img.width);
    const std::size_t n = out.L.size();
    for (std::size_t i = 0; i < n; ++i) {
        out.L[i] = (img.L_n[i] + 1.0) * 50.0;
        out.a[i] = img.ab_n[i] * kChromaScale;
        out.b[i] = img.ab_n[n + i] * kChromaScale;
    }
    return out;
}

RgbImage merge_luminance_chroma(const Plane& luminance, const Tensor& ab_n) {
    const auto& s = ab_n.shape();
    int ch = 0, h = 0, w = 0;
    if (s.size() == 3) {
        ch = s[0], h = s[1], w = s[2];
    } else if (s.size() == 4 && s[0] == 1) {
        ch = s[1], h = s[2], w = s[3];
    } else {
        throw ShapeError("merge_luminance_chroma: chroma tensor must be [2,H,W] or [1,2,H,W], got " +
                         ab_n.shape_str());
    }
    if (ch != 2) throw ShapeError("merge_luminance_chroma: expected 2 chroma channels");
    if (h != luminance.height || w != luminance.width) {
        throw ShapeError("merge_luminance_chroma: luminance is " + std::to_string(luminance.height) +
                         "x" + std::to_string(luminance.width) + " but chroma is " +
                         std::to_string(h) + "x" + std::to_string(w));
    }
    LabImage lab(h, w);
    const std::size_t n = lab.L.size();
    const double* a_n = ab_n.data();
    const double* b_n = ab_n.data() + n;
    for (std::size_t i = 0; i < n; ++i) {
        lab.L[i] = luminance.values[i];
        lab.a[i] = a_n[i] * kChromaScale;
        lab.b[i] = b_n[i] * kChromaScale;
    }
    return lab_to_rgb(lab);
}

void lab_to_rgb_smooth(const double* L, const double* a, const double* b,
                       std::size_t n, double* rgb) {
    for (std::size_t i = 0; i < n; ++i) {
        double lin[3];
        lab_to_linear_rgb(L[i], a[i], b[i], lin);
        for (int c = 0; c < 3; ++c) {
            rgb[static_cast<std::size_t>(c) * n + i] = linear_to_srgb(lin[c]);
        }
    }
}

void lab_to_rgb_smooth_backward(const double* L, const double* a, const double* b,
                                std::size_t n, const double* d_rgb,
                                double* d_a, double* d_b) {
    for (std::size_t i = 0; i < n; ++i) {
        const double fy = (L[i] + 16.0) / 116.0;
        const double fx = fy + a[i] / 500.0;
        const double fz = fy - b[i] / 200.0;
        const double yr = L[i] > kKappa * kEps ? fy * fy * fy : L[i] / kKappa;
        const double x = kXn * lab_f_inv(fx);
        const double y = kYn * yr;
        const double z = kZn * lab_f_inv(fz);
        // dX/da and dZ/db; X is the only XYZ component touched by a, Z by b.
        const double dx_da = kXn * lab_f_inv_deriv(fx) / 500.0;
        const double dz_db = -kZn * lab_f_inv_deriv(fz) / 200.0;
        double ga = 0.0, gb = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double lin = kMinv[c][0] * x + kMinv[c][1] * y + kMinv[c][2] * z;
            const double up = d_rgb[static_cast<std::size_t>(c) * n + i] * linear_to_srgb_deriv(lin);
            ga += up * kMinv[c][0] * dx_da;
            gb += up * kMinv[c][2] * dz_db;
        }
        d_a[i] += ga;
        d_b[i] += gb;
    }
}

}  // namespace cupgan::colorspace
