#include "voxelfield/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace voxelfield {

namespace {

void check_size(int width, int height, std::size_t n) {
    if (width < 1 || height < 1 || static_cast<std::size_t>(width) * height != n) {
        throw std::invalid_argument("image buffer does not match its size");
    }
}

png_image blank_image(int width, int height, png_uint_32 format) {
    png_image img;
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(width);
    img.height = static_cast<png_uint_32>(height);
    img.format = format;
    return img;
}

void finish_write(png_image& img, const std::filesystem::path& path, const void* data, const void* colormap) {
    const int ok = png_image_write_to_file(&img, path.c_str(), 0, data, 0, colormap);
    const std::string message = img.message;
    png_image_free(&img);
    if (!ok) throw std::runtime_error("writing " + path.string() + ": " + message);
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

} // namespace

void write_png_rgb(const std::filesystem::path& path, int width, int height, const Matrix& rgb) {
    check_size(width, height, static_cast<std::size_t>(rgb.rows()));
    if (rgb.cols() != 3) throw std::invalid_argument("write_png_rgb: expected 3 channels");
    std::vector<std::uint8_t> data(static_cast<std::size_t>(rgb.size()));
    for (Eigen::Index i = 0; i < rgb.rows(); ++i) {
        for (int c = 0; c < 3; ++c) data[static_cast<std::size_t>(i) * 3 + c] = to_byte(rgb(i, c));
    }
    png_image img = blank_image(width, height, PNG_FORMAT_RGB);
    finish_write(img, path, data.data(), nullptr);
}

void write_png_depth(const std::filesystem::path& path, int width, int height, std::span<const double> depth,
                     double max_value) {
    check_size(width, height, depth.size());
    if (!(max_value > 0.0)) throw std::invalid_argument("write_png_depth: max_value must be positive");
    std::vector<std::uint16_t> data(depth.size());
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double v = depth[i] < 0.0 ? 0.0 : std::min(depth[i] / max_value, 1.0);
        data[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
    // The linear 16-bit gray format writes samples unchanged.
    png_image img = blank_image(width, height, PNG_FORMAT_LINEAR_Y);
    finish_write(img, path, data.data(), nullptr);
}

void write_png_labels(const std::filesystem::path& path, int width, int height, std::span<const LabelClass> seg,
                      const LabelScheme& scheme) {
    check_size(width, height, seg.size());
    std::vector<std::uint8_t> data(seg.size());
    for (std::size_t i = 0; i < seg.size(); ++i) data[i] = static_cast<std::uint8_t>(class_index(seg[i]));
    std::array<std::uint8_t, 3 * kNumClasses> palette{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const Rgb& a = scheme.albedo(static_cast<LabelClass>(c));
        palette[3 * c] = to_byte(a.r);
        palette[3 * c + 1] = to_byte(a.g);
        palette[3 * c + 2] = to_byte(a.b);
    }
    png_image img = blank_image(width, height, PNG_FORMAT_RGB_COLORMAP);
    img.colormap_entries = kNumClasses;
    finish_write(img, path, data.data(), palette.data());
}

PngImage read_png(const std::filesystem::path& path) {
    png_image img = blank_image(0, 0, 0);
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        const std::string message = img.message;
        png_image_free(&img);
        throw std::runtime_error("reading " + path.string() + ": " + message);
    }
    PngImage out;
    out.width = static_cast<int>(img.width);
    out.height = static_cast<int>(img.height);
    const bool linear = (img.format & PNG_FORMAT_FLAG_LINEAR) != 0;
    const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
    if (linear) {
        img.format = PNG_FORMAT_LINEAR_Y;
        out.channels = 1;
        out.bit_depth = 16;
        std::vector<std::uint16_t> buf(PNG_IMAGE_SIZE(img) / 2);
        const int ok = png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr);
        const std::string message = img.message;
        png_image_free(&img);
        if (!ok) throw std::runtime_error("reading " + path.string() + ": " + message);
        out.samples.assign(buf.begin(), buf.end());
    } else {
        img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
        out.channels = color ? 3 : 1;
        out.bit_depth = 8;
        std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
        const int ok = png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr);
        const std::string message = img.message;
        png_image_free(&img);
        if (!ok) throw std::runtime_error("reading " + path.string() + ": " + message);
        out.samples.assign(buf.begin(), buf.end());
    }
    return out;
}

} // namespace voxelfield
