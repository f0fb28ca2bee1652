#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "voxelfield/labels.hpp"
#include "voxelfield/tensor.hpp"

namespace voxelfield {

/// 8-bit RGB from a (width * height) x 3 matrix of values in [0, 1] (clamped).
void write_png_rgb(const std::filesystem::path& path, int width, int height, const Matrix& rgb);

/// 16-bit grayscale; value / max_value mapped to [0, 65535], negative values written as 0.
void write_png_depth(const std::filesystem::path& path, int width, int height, std::span<const double> depth,
                     double max_value);

/// Paletted PNG, one palette entry per label class colored with the scheme's albedo.
void write_png_labels(const std::filesystem::path& path, int width, int height, std::span<const LabelClass> seg,
                      const LabelScheme& scheme);

struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 (gray) or 3 (rgb); palettes are expanded
    int bit_depth = 0; // 16 for linear gray files, else 8
    std::vector<std::uint16_t> samples; // row-major, interleaved channels
};
/// Decodes a PNG to 8-bit gray or RGB, or 16-bit gray for files written by write_png_depth.
PngImage read_png(const std::filesystem::path& path);

} // namespace voxelfield
