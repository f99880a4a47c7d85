#ifndef MIXNET_IMAGE_HPP
#define MIXNET_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "mixnet/common.hpp"

namespace mixnet {

// Planar image, values in [0,1], layout (c * height + y) * width + x.
// channels is 1 (grayscale) or 3 (RGB).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> pix;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c), pix(static_cast<size_t>(h) * w * c, fill) {}

    double& at(int c, int y, int x) { return pix[(static_cast<size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return pix[(static_cast<size_t>(c) * height + y) * width + x]; }

    bool empty() const { return pix.empty(); }
};

inline Image to_gray(const Image& img) {
    if (img.channels == 1) return img;
    Image g(img.height, img.width, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double v = 0.0;
            for (int c = 0; c < img.channels; ++c) v += img.at(c, y, x);
            g.at(0, y, x) = v / img.channels;
        }
    return g;
}

inline Image gray_to_rgb(const Image& img) {
    if (img.channels == 3) return img;
    Image rgb(img.height, img.width, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) rgb.at(c, y, x) = img.at(0, y, x);
    return rgb;
}

inline Image resize_bilinear(const Image& img, int out_h, int out_w) {
    Image out(out_h, out_w, img.channels);
    const double sy = out_h > 1 ? static_cast<double>(img.height - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(img.width - 1) / (out_w - 1) : 0.0;
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < out_h; ++y) {
            double fy = y * sy;
            int y0 = static_cast<int>(fy);
            int y1 = std::min(y0 + 1, img.height - 1);
            double wy = fy - y0;
            for (int x = 0; x < out_w; ++x) {
                double fx = x * sx;
                int x0 = static_cast<int>(fx);
                int x1 = std::min(x0 + 1, img.width - 1);
                double wx = fx - x0;
                double top = img.at(c, y0, x0) * (1 - wx) + img.at(c, y0, x1) * wx;
                double bot = img.at(c, y1, x0) * (1 - wx) + img.at(c, y1, x1) * wx;
                out.at(c, y, x) = top * (1 - wy) + bot * wy;
            }
        }
    return out;
}

inline unsigned char clamp_u8(double v) {
    double s = std::round(v * 255.0);
    if (s < 0) s = 0;
    if (s > 255) s = 255;
    return static_cast<unsigned char>(s);
}

// --- PNG I/O (8-bit gray or RGB) ---

inline void save_png(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw std::runtime_error("save_png: unsupported channel count for " + path);
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("save_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("save_png: libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("save_png: write failed for " + path);
    }
    png_init_io(png, fp);
    int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // fixed settings so identical pixels give identical bytes
    png_set_compression_level(png, 6);
    png_write_info(png, info);

    std::vector<unsigned char> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                row[static_cast<size_t>(x) * img.channels + c] = clamp_u8(img.at(c, y, x));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline Image load_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("load_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("load_png: libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("load_png: read failed for " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_packing(png);
    png_set_expand(png);          // palette -> rgb, gray depth < 8 -> 8
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int ch = static_cast<int>(png_get_channels(png, info));
    if (ch != 1 && ch != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("load_png: unsupported channel count in " + path);
    }
    std::vector<unsigned char> row(static_cast<size_t>(w) * ch);
    Image img(h, w, ch);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c)
                img.at(c, y, x) = row[static_cast<size_t>(x) * ch + c] / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

}  // namespace mixnet

#endif
