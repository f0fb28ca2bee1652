#include "voxelfield/labels.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace voxelfield {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "ignore", "sky", "tree", "dirt", "flower", "grass",
    "gravel", "water", "rock", "stone", "sand", "snow",
};

struct RawEntry {
    std::string_view raw;
    LabelClass cls;
};

// Logs and leaves count as tree; tall plants count as grass.
constexpr RawEntry kDefaultTable[] = {
    {"air", LabelClass::Ignore},
    {"grass_block", LabelClass::Grass},
    {"tall_grass", LabelClass::Grass},
    {"fern", LabelClass::Grass},
    {"oak_log", LabelClass::Tree},
    {"birch_log", LabelClass::Tree},
    {"spruce_log", LabelClass::Tree},
    {"oak_leaves", LabelClass::Tree},
    {"birch_leaves", LabelClass::Tree},
    {"spruce_leaves", LabelClass::Tree},
    {"coarse_dirt", LabelClass::Dirt},
    {"podzol", LabelClass::Dirt},
    {"farmland", LabelClass::Dirt},
    {"dandelion", LabelClass::Flower},
    {"poppy", LabelClass::Flower},
    {"cornflower", LabelClass::Flower},
    {"clay", LabelClass::Gravel},
    {"andesite", LabelClass::Rock},
    {"granite", LabelClass::Rock},
    {"diorite", LabelClass::Rock},
    {"bedrock", LabelClass::Rock},
    {"cobblestone", LabelClass::Stone},
    {"mossy_cobblestone", LabelClass::Stone},
    {"sandstone", LabelClass::Sand},
    {"red_sand", LabelClass::Sand},
    {"snow_block", LabelClass::Snow},
    {"ice", LabelClass::Snow},
    {"packed_ice", LabelClass::Snow},
};

constexpr Rgb kDefaultAlbedo[kNumClasses] = {
    {0.50, 0.50, 0.50}, // ignore
    {0.55, 0.70, 0.95}, // sky
    {0.16, 0.42, 0.14}, // tree
    {0.45, 0.31, 0.20}, // dirt
    {0.90, 0.78, 0.20}, // flower
    {0.35, 0.62, 0.24}, // grass
    {0.52, 0.50, 0.48}, // gravel
    {0.15, 0.33, 0.70}, // water
    {0.40, 0.38, 0.36}, // rock
    {0.62, 0.62, 0.62}, // stone
    {0.86, 0.80, 0.55}, // sand
    {0.95, 0.96, 0.98}, // snow
};

LabelClass parse_class_or_throw(std::string_view name, const std::filesystem::path& path, int line) {
    auto c = class_from_name(name);
    if (!c) {
        std::ostringstream msg;
        msg << path.string() << ":" << line << ": unknown class '" << name << "'";
        throw std::runtime_error(msg.str());
    }
    return *c;
}

} // namespace

std::string_view class_name(LabelClass c) { return kClassNames.at(class_index(c)); }

std::optional<LabelClass> class_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        if (kClassNames[i] == name) return static_cast<LabelClass>(i);
    }
    return std::nullopt;
}

LabelScheme::LabelScheme() {
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        table_.emplace(std::string(kClassNames[i]), static_cast<LabelClass>(i));
        albedo_[i] = kDefaultAlbedo[i];
    }
    for (const auto& e : kDefaultTable) table_.emplace(std::string(e.raw), e.cls);
}

std::optional<LabelClass> LabelScheme::lookup(std::string_view raw_name) const {
    auto it = table_.find(std::string(raw_name));
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

void LabelScheme::set_mapping(std::string raw_name, LabelClass c) { table_[std::move(raw_name)] = c; }

void LabelScheme::load_mapping_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mapping file " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string raw, cls, extra;
        if (!(fields >> raw)) continue;
        if (!(fields >> cls) || (fields >> extra)) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected 'raw_name class_name'");
        }
        set_mapping(raw, parse_class_or_throw(cls, path, lineno));
    }
}

void LabelScheme::load_palette_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open palette file " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string cls;
        if (!(fields >> cls)) continue;
        int r = 0, g = 0, b = 0;
        std::string extra;
        if (!(fields >> r >> g >> b) || (fields >> extra) || r < 0 || r > 255 || g < 0 || g > 255 ||
            b < 0 || b > 255) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected 'class_name r g b' with channels in 0..255");
        }
        set_albedo(parse_class_or_throw(cls, path, lineno), Rgb{r / 255.0, g / 255.0, b / 255.0});
    }
}

LabelClass translate_label(std::string_view raw_name, const LabelScheme& scheme, bool* unknown) {
    auto c = scheme.lookup(raw_name);
    if (unknown) *unknown = !c.has_value();
    if (!c) {
        std::clog << "warning: unknown label '" << raw_name << "', mapped to ignore\n";
        return LabelClass::Ignore;
    }
    return *c;
}

double label_entropy(std::span<const LabelClass> seg) {
    std::array<std::size_t, kNumClasses> counts{};
    std::size_t total = 0;
    for (LabelClass c : seg) {
        if (c == LabelClass::Ignore) continue;
        ++counts[class_index(c)];
        ++total;
    }
    if (total == 0) return 0.0;
    double h = 0.0;
    for (std::size_t n : counts) {
        if (n == 0) continue;
        const double p = static_cast<double>(n) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

} // namespace voxelfield
