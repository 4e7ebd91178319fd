#pragma once

#include "cupgan/image.hpp"
#include "cupgan/tensor.hpp"

namespace cupgan::colorspace {

// CIE 1976 L*a*b* raster, planar. L nominally in [0,100]; the a/b chroma
// range this library normalizes against is [-128, 128].
struct LabImage {
    int height = 0;
    int width = 0;
    std::vector<double> L;
    std::vector<double> a;
    std::vector<double> b;

    LabImage() = default;
    LabImage(int h, int w)
        : height(h),
          width(w),
          L(static_cast<std::size_t>(h) * w, 0.0),
          a(L.size(), 0.0),
          b(L.size(), 0.0) {}
};

// Lab mapped into [-1,1]: L_n = L/50 - 1, ab_n = ab/128.
struct NormalizedLab {
    int height = 0;
    int width = 0;
    std::vector<double> L_n;
    std::vector<double> ab_n;  // plane a then plane b, each height*width

    NormalizedLab() = default;
    NormalizedLab(int h, int w)
        : height(h),
          width(w),
          L_n(static_cast<std::size_t>(h) * w, 0.0),
          ab_n(2 * L_n.size(), 0.0) {}
};

inline constexpr double kChromaScale = 128.0;

// sRGB -> CIELAB under D65 (standard sRGB companding, linear RGB -> XYZ,
// XYZ -> Lab). Total on valid input.
LabImage rgb_to_lab(const RgbImage& img);

// Inverse transform. Out-of-gamut values are clipped into [0,255] after
// inverse companding; never throws on gamut.
RgbImage lab_to_rgb(const LabImage& img);

NormalizedLab normalize_lab(const LabImage& img);
LabImage denormalize_lab(const NormalizedLab& img);

// Scalar conversions used by the image routines and handy in tests.
void rgb_pixel_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b,
                      double* L, double* a, double* bb);
void lab_pixel_to_rgb(double L, double a, double b,
                      std::uint8_t* r, std::uint8_t* g, std::uint8_t* bb);

// Pairs a raw-L plane with normalized chroma [2,H,W] (or [1,2,H,W]) and
// renders sRGB. Throws ShapeError on mismatched spatial dimensions.
RgbImage merge_luminance_chroma(const Plane& luminance, const Tensor& ab_n);

// Differentiable Lab -> RGB used on the perceptual-loss path: identical to
// lab_to_rgb except no clipping and no quantization, so values may leave
// [0,1] and gradients flow everywhere. Outputs planar RGB scaled to [0,1].
//
// rgb must hold 3*n doubles (R plane, G plane, B plane).
void lab_to_rgb_smooth(const double* L, const double* a, const double* b,
                       std::size_t n, double* rgb);

// Accumulates d_loss/d_a and d_loss/d_b given d_loss/d_rgb (planar, 3*n).
// The L-channel gradient is not produced; L comes from the input image.
void lab_to_rgb_smooth_backward(const double* L, const double* a, const double* b,
                                std::size_t n, const double* d_rgb,
                                double* d_a, double* d_b);

}  // namespace cupgan::colorspace
