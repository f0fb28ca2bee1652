#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>

namespace voxelfield {

// The abstraction classes every raw material label is folded into.
enum class LabelClass : std::uint8_t {
    Ignore = 0,
    Sky,
    Tree,
    Dirt,
    Flower,
    Grass,
    Gravel,
    Water,
    Rock,
    Stone,
    Sand,
    Snow,
};

inline constexpr std::size_t kNumClasses = 12;

inline constexpr std::size_t class_index(LabelClass c) { return static_cast<std::size_t>(c); }

std::string_view class_name(LabelClass c);
std::optional<LabelClass> class_from_name(std::string_view name);

struct Rgb {
    double r = 0.0, g = 0.0, b = 0.0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Raw-name lookup table plus the per-class albedo used by the target renderer.
class LabelScheme {
public:
    /// Default vocabulary: every class name maps to itself, plus common
    /// block-world material names.
    LabelScheme();

    /// Exact table lookup; nullopt when the name is not in the table.
    std::optional<LabelClass> lookup(std::string_view raw_name) const;

    void set_mapping(std::string raw_name, LabelClass c);
    void set_albedo(LabelClass c, Rgb albedo) { albedo_[class_index(c)] = albedo; }
    const Rgb& albedo(LabelClass c) const { return albedo_[class_index(c)]; }
    std::size_t mapping_size() const { return table_.size(); }

    /// Merges `raw_name class_name` lines. Throws std::runtime_error with the
    /// line number on malformed input.
    void load_mapping_file(const std::filesystem::path& path);
    /// Reads `class_name r g b` lines with 0-255 channels.
    void load_palette_file(const std::filesystem::path& path);

private:
    std::unordered_map<std::string, LabelClass> table_;
    std::array<Rgb, kNumClasses> albedo_{};
};

/// Lenient lookup: unknown names fall back to Ignore and a warning is written
/// to std::clog. `unknown`, when given, reports whether the fallback fired.
LabelClass translate_label(std::string_view raw_name, const LabelScheme& scheme,
                           bool* unknown = nullptr);

/// Shannon entropy in nats of the class histogram, skipping Ignore pixels.
double label_entropy(std::span<const LabelClass> seg);

} // namespace voxelfield
