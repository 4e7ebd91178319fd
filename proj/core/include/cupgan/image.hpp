#pragma once

#include <cstdint>
#include <vector>

namespace cupgan {

// Decoded 8-bit sRGB raster, interleaved RGB row-major.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;  // height*width*3

    RgbImage() = default;
    RgbImage(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0) {}

    std::uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    bool same_size(const RgbImage& o) const { return height == o.height && width == o.width; }
};

// One real-valued image plane.
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> values;  // height*width

    Plane() = default;
    Plane(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0.0) {}

    double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

}  // namespace cupgan
