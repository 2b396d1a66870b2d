#include "sdfrecon/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sdfrecon {

namespace {

uint8_t quantize(double v) { return static_cast<uint8_t>(clampd(v, 0.0, 1.0) * 255.0 + 0.5); }

void write_png(const std::string& path, const std::vector<uint8_t>& bytes, int w, int h,
               int channels) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = w;
    img.height = h;
    img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr))
        throw std::runtime_error("failed to write PNG: " + path);
}

std::vector<uint8_t> read_png(const std::string& path, int channels, int& w, int& h) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw std::runtime_error("failed to open PNG: " + path);
    img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<uint8_t> bytes(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
        png_image_free(&img);
        throw std::runtime_error("failed to read PNG: " + path);
    }
    w = img.width;
    h = img.height;
    return bytes;
}

} // namespace

void write_png_rgb(const std::string& path, const ImageRGB& img) {
    std::vector<uint8_t> bytes(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) bytes[i] = quantize(img.data[i]);
    write_png(path, bytes, img.width, img.height, 3);
}

void write_png_gray(const std::string& path, const ImageGray& img) {
    std::vector<uint8_t> bytes(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) bytes[i] = quantize(img.data[i]);
    write_png(path, bytes, img.width, img.height, 1);
}

ImageRGB read_png_rgb(const std::string& path) {
    int w, h;
    auto bytes = read_png(path, 3, w, h);
    ImageRGB img(w, h);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = bytes[i] / 255.0;
    return img;
}

ImageGray read_png_gray(const std::string& path) {
    int w, h;
    auto bytes = read_png(path, 1, w, h);
    ImageGray img(w, h);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = bytes[i] / 255.0;
    return img;
}

void write_raw_float(const std::string& path, const ImageRGB& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("failed to open for writing: " + path);
    f.write("RAWF", 4);
    int32_t dims[3] = {img.width, img.height, 3};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    const size_t n = static_cast<size_t>(img.width) * img.height;
    std::vector<float> plane(n);
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < n; ++i) plane[i] = static_cast<float>(img.data[i * 3 + c]);
        f.write(reinterpret_cast<const char*>(plane.data()), n * sizeof(float));
    }
    if (!f) throw std::runtime_error("failed while writing: " + path);
}

ImageRGB read_raw_float(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("failed to open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (std::memcmp(magic, "RAWF", 4) != 0)
        throw std::runtime_error("bad raw float magic in " + path);
    int32_t dims[3];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    ImageRGB img(dims[0], dims[1]);
    const size_t n = static_cast<size_t>(dims[0]) * dims[1];
    std::vector<float> plane(n);
    for (int c = 0; c < dims[2] && c < 3; ++c) {
        f.read(reinterpret_cast<char*>(plane.data()), n * sizeof(float));
        for (size_t i = 0; i < n; ++i) img.data[i * 3 + c] = plane[i];
    }
    if (!f) throw std::runtime_error("truncated raw float file: " + path);
    return img;
}

ImageRGB downscale(const ImageRGB& img, int divisor) {
    if (divisor <= 1) return img;
    ImageRGB out(img.width / divisor, img.height / divisor);
    const double inv = 1.0 / (divisor * divisor);
    for (int v = 0; v < out.height; ++v)
        for (int u = 0; u < out.width; ++u) {
            Vec3 acc{0, 0, 0};
            for (int dv = 0; dv < divisor; ++dv)
                for (int du = 0; du < divisor; ++du)
                    acc += img.pixel(u * divisor + du, v * divisor + dv);
            out.set_pixel(u, v, acc * inv);
        }
    return out;
}

ImageGray downscale_mask(const ImageGray& mask, int divisor) {
    if (divisor <= 1) return mask;
    ImageGray out(mask.width / divisor, mask.height / divisor);
    const double inv = 1.0 / (divisor * divisor);
    for (int v = 0; v < out.height; ++v)
        for (int u = 0; u < out.width; ++u) {
            double acc = 0.0;
            for (int dv = 0; dv < divisor; ++dv)
                for (int du = 0; du < divisor; ++du) acc += mask.at(u * divisor + du, v * divisor + dv);
            out.at(u, v) = acc * inv > 0.5 ? 1.0 : 0.0;
        }
    return out;
}

} // namespace sdfrecon
