#include "c3dag/image.hpp"

#include "c3dag/error.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace c3dag {

Image to_image(const Rgb8Image& img) {
    Image out(img.width, img.height, 3);
    for (std::size_t k = 0; k < img.data.size(); ++k) out.data[k] = img.data[k] / 255.0;
    return out;
}

Rgb8Image to_rgb8(const Image& img) {
    if (img.channels < 1) throw DomainError("image has no channels");
    Rgb8Image out(img.width, img.height);
    for (int j = 0; j < img.height; ++j)
        for (int i = 0; i < img.width; ++i)
            for (int c = 0; c < 3; ++c) {
                const double v = img.at(i, j, std::min(c, img.channels - 1));
                out.pixel(i, j)[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            }
    return out;
}

namespace {

std::string encode_with(png_image& info, const void* buffer, std::ptrdiff_t stride) {
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&info, nullptr, &size, 0, buffer, stride, nullptr))
        throw Error(std::string("png encode failed: ") + info.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&info, out.data(), &size, 0, buffer, stride, nullptr))
        throw Error(std::string("png encode failed: ") + info.message);
    out.resize(size);
    return out;
}

}  // namespace

std::string encode_png(const Rgb8Image& img) {
    png_image info;
    std::memset(&info, 0, sizeof info);
    info.version = PNG_IMAGE_VERSION;
    info.width = static_cast<png_uint_32>(img.width);
    info.height = static_cast<png_uint_32>(img.height);
    info.format = PNG_FORMAT_RGB;
    return encode_with(info, img.data.data(), 0);
}

std::string encode_png_gray16(int width, int height, const std::vector<std::uint16_t>& values) {
    if (values.size() != static_cast<std::size_t>(width) * height) throw DomainError("depth buffer size mismatch");
    png_image info;
    std::memset(&info, 0, sizeof info);
    info.version = PNG_IMAGE_VERSION;
    info.width = static_cast<png_uint_32>(width);
    info.height = static_cast<png_uint_32>(height);
    // Linear 16-bit greyscale.
    info.format = PNG_FORMAT_LINEAR_Y;
    return encode_with(info, values.data(), 0);
}

Rgb8Image decode_png(std::string_view bytes) {
    png_image info;
    std::memset(&info, 0, sizeof info);
    info.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&info, bytes.data(), bytes.size()))
        throw ParseError(std::string("png decode failed: ") + info.message);
    info.format = PNG_FORMAT_RGB;
    Rgb8Image out(static_cast<int>(info.width), static_cast<int>(info.height));
    if (!png_image_finish_read(&info, nullptr, out.data.data(), 0, nullptr))
        throw ParseError(std::string("png decode failed: ") + info.message);
    return out;
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string encode_pfm(const DepthMap& depth, bool miss_as_zero) {
    static_assert(std::endian::native == std::endian::little, "PFM writer assumes a little-endian host");
    std::string out = "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n-1.0\n";
    const std::size_t header = out.size();
    out.resize(header + depth.depth.size() * 4);
    // PFM rows run bottom to top.
    std::size_t pos = header;
    for (int j = depth.height - 1; j >= 0; --j)
        for (int i = 0; i < depth.width; ++i) {
            double d = depth.at(i, j);
            if (!std::isfinite(d) && miss_as_zero) d = 0.0;
            const float f = static_cast<float>(d);
            std::memcpy(&out[pos], &f, 4);
            pos += 4;
        }
    return out;
}

DepthMap decode_pfm(std::string_view bytes) {
    std::istringstream in{std::string(bytes)};
    std::string magic;
    double scale = 0;
    DepthMap d;
    in >> magic >> d.width >> d.height >> scale;
    if (magic != "Pf" || d.width <= 0 || d.height <= 0 || scale >= 0)
        throw ParseError("unsupported PFM header");
    in.get();
    const auto offset = static_cast<std::size_t>(in.tellg());
    if (bytes.size() < offset + static_cast<std::size_t>(d.width) * d.height * 4) throw ParseError("truncated PFM");
    d.depth.resize(static_cast<std::size_t>(d.width) * d.height);
    std::size_t pos = offset;
    for (int j = d.height - 1; j >= 0; --j)
        for (int i = 0; i < d.width; ++i) {
            float f;
            std::memcpy(&f, bytes.data() + pos, 4);
            pos += 4;
            d.depth[static_cast<std::size_t>(j) * d.width + i] = f;
        }
    return d;
}

std::vector<std::uint16_t> normalize_depth16(const DepthMap& depth) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : depth.depth)
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    std::vector<std::uint16_t> out(depth.depth.size(), 0);
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double v = depth.depth[k];
        if (!std::isfinite(v)) continue;
        out[k] = static_cast<std::uint16_t>(1 + std::lround((hi - v) / span * 65534.0));
    }
    return out;
}

}  // namespace c3dag
