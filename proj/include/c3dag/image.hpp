#pragma once

#include "c3dag/geometry.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace c3dag {

/// Interleaved floating-point image, row-major with v growing downwards.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    double& at(int i, int j, int c) { return data[(static_cast<std::size_t>(j) * width + i) * channels + c]; }
    double at(int i, int j, int c) const { return data[(static_cast<std::size_t>(j) * width + i) * channels + c]; }
    Resolution resolution() const { return {width, height}; }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

/// 8-bit RGB image.
struct Rgb8Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // 3 bytes per pixel

    Rgb8Image() = default;
    Rgb8Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* pixel(int i, int j) { return &data[(static_cast<std::size_t>(j) * width + i) * 3]; }
    const std::uint8_t* pixel(int i, int j) const { return &data[(static_cast<std::size_t>(j) * width + i) * 3]; }

    bool operator==(const Rgb8Image&) const = default;
};

/// Per-pixel depth along the camera forward axis; +infinity marks a miss.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<double> depth;

    double at(int i, int j) const { return depth[static_cast<std::size_t>(j) * width + i]; }
    bool hit(int i, int j) const { return std::isfinite(at(i, j)); }
};

Image to_image(const Rgb8Image& img);
/// Clamps to [0, 1] and rounds. Uses the first three channels (grey for one).
Rgb8Image to_rgb8(const Image& img);

std::string encode_png(const Rgb8Image& img);
/// 16-bit greyscale PNG.
std::string encode_png_gray16(int width, int height, const std::vector<std::uint16_t>& values);
Rgb8Image decode_png(std::string_view bytes);

void write_file(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

/// Little-endian single-channel PFM. Misses are written as 0 when
/// `miss_as_zero` is set and as +inf otherwise.
std::string encode_pfm(const DepthMap& depth, bool miss_as_zero = true);
DepthMap decode_pfm(std::string_view bytes);

/// Hits mapped to [1, 65535] with near = 65535; misses are 0.
std::vector<std::uint16_t> normalize_depth16(const DepthMap& depth);

}  // namespace c3dag
