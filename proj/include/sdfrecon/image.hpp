#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdfrecon/vec.hpp"

namespace sdfrecon {

// Row-major RGB image with linear [0,1] doubles.
struct ImageRGB {
    int width = 0, height = 0;
    std::vector<double> data; // 3 per pixel

    ImageRGB() = default;
    ImageRGB(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0.0) {}

    Vec3 pixel(int u, int v) const {
        const double* p = data.data() + (static_cast<size_t>(v) * width + u) * 3;
        return {p[0], p[1], p[2]};
    }
    void set_pixel(int u, int v, const Vec3& c) {
        double* p = data.data() + (static_cast<size_t>(v) * width + u) * 3;
        p[0] = c.x;
        p[1] = c.y;
        p[2] = c.z;
    }
};

struct ImageGray {
    int width = 0, height = 0;
    std::vector<double> data;

    ImageGray() = default;
    ImageGray(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h, 0.0) {}

    double at(int u, int v) const { return data[static_cast<size_t>(v) * width + u]; }
    double& at(int u, int v) { return data[static_cast<size_t>(v) * width + u]; }
};

// 8-bit PNG IO. Values are clamped to [0,1] and quantized on write.
void write_png_rgb(const std::string& path, const ImageRGB& img);
void write_png_gray(const std::string& path, const ImageGray& img);
ImageRGB read_png_rgb(const std::string& path);
ImageGray read_png_gray(const std::string& path);

// Raw float dump: magic "RAWF", int32 width/height/channels, then
// little-endian f32 planes (all of channel 0, then channel 1, ...).
void write_raw_float(const std::string& path, const ImageRGB& img);
ImageRGB read_raw_float(const std::string& path);

// Box-filter downscale by an integer divisor.
ImageRGB downscale(const ImageRGB& img, int divisor);
ImageGray downscale_mask(const ImageGray& mask, int divisor); // majority vote

} // namespace sdfrecon
