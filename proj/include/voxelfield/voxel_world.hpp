#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "voxelfield/labels.hpp"
#include "voxelfield/tensor.hpp"
#include "voxelfield/vec3.hpp"

namespace voxelfield {

struct VoxelCoord {
    int x = 0, y = 0, z = 0;
    friend constexpr bool operator==(const VoxelCoord&, const VoxelCoord&) = default;
    friend constexpr auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;
};

// Lattice coordinates of a voxel corner; voxel (x,y,z) spans corners x..x+1 etc.
struct VertexKey {
    int x = 0, y = 0, z = 0;
    friend constexpr bool operator==(const VertexKey&, const VertexKey&) = default;
    friend constexpr auto operator<=>(const VertexKey&, const VertexKey&) = default;
};

// 21 bits per axis. Coordinates must lie in [0, 2^21).
constexpr std::uint64_t pack_coord(int x, int y, int z) {
    return (static_cast<std::uint64_t>(x) << 42) | (static_cast<std::uint64_t>(y) << 21) |
           static_cast<std::uint64_t>(z);
}

struct LabelId {
    std::uint16_t raw = 0; // index into VoxelWorld::raw_names()
    LabelClass cls = LabelClass::Ignore;
    friend constexpr bool operator==(const LabelId&, const LabelId&) = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Sparse labeled occupancy grid with unit voxels; the origin is the corner of voxel (0,0,0)
/// and +y points up.
class VoxelWorld {
public:
    static constexpr int kMaxAxis = (1 << 21) - 2;

    VoxelWorld(int dim_x, int dim_y, int dim_z);

    std::array<int, 3> dims() const { return dims_; }
    bool in_bounds(VoxelCoord c) const {
        return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < dims_[0] && c.y < dims_[1] && c.z < dims_[2];
    }

    /// Registers (or reuses) a raw label name and returns its id.
    LabelId intern(std::string_view raw_name, LabelClass cls);
    const std::vector<std::string>& raw_names() const { return raw_names_; }

    /// Returns false when the coordinate is already occupied. Throws on out-of-bounds.
    bool insert(VoxelCoord c, LabelId label);
    bool insert(VoxelCoord c, LabelClass cls) { return insert(c, intern(class_name(cls), cls)); }
    void erase(VoxelCoord c) { cells_.erase(pack_coord(c.x, c.y, c.z)); }
    /// Removes every voxel; dims and the raw label table are kept.
    void clear() { cells_.clear(); }

    const LabelId* find(VoxelCoord c) const {
        if (!in_bounds(c)) return nullptr;
        auto it = cells_.find(pack_coord(c.x, c.y, c.z));
        return it == cells_.end() ? nullptr : &it->second;
    }
    bool occupied(VoxelCoord c) const { return find(c) != nullptr; }

    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }
    double occupancy_ratio() const;

    /// Occupied voxels in lexicographic (x, y, z) order.
    std::vector<std::pair<VoxelCoord, LabelId>> sorted_voxels() const;

    /// Highest occupied y in column (x, z), or -1 when the column is empty.
    int column_top(int x, int z) const;

private:
    std::array<int, 3> dims_;
    std::unordered_map<std::uint64_t, LabelId> cells_;
    std::vector<std::string> raw_names_;
    std::vector<LabelClass> raw_classes_;
};

/// Parses the text GVOX format. Raw labels must be known to `scheme`.
VoxelWorld parse_world(std::string_view text, const LabelScheme& scheme, int max_dim = 4096);
VoxelWorld load_world(const std::filesystem::path& path, const LabelScheme& scheme, int max_dim = 4096);
std::string format_world(const VoxelWorld& world);
void save_world(const std::filesystem::path& path, const VoxelWorld& world);

/// Keeps voxels whose 6-connected distance to an exposed face is at most
/// `thickness` (an exposed voxel has distance 1). A face is exposed when it
/// borders an empty cell inside the grid or the top of the grid.
VoxelWorld shell_extract(const VoxelWorld& world, int thickness = 4);

/// Learnable vectors on voxel corners, one row per distinct corner shared by
/// every voxel touching it. Rows are ordered by sorted VertexKey.
class FeatureTable {
public:
    FeatureTable() = default;
    FeatureTable(std::vector<VertexKey> keys, Matrix values);

    int dim() const { return static_cast<int>(values_.cols()); }
    std::size_t size() const { return keys_.size(); }
    const std::vector<VertexKey>& keys() const { return keys_; }
    Matrix& values() { return values_; }
    const Matrix& values() const { return values_; }

    std::optional<std::uint32_t> index_of(VertexKey k) const;
    std::span<const double> entry(VertexKey k) const;

private:
    std::vector<VertexKey> keys_;
    std::unordered_map<std::uint64_t, std::uint32_t> index_;
    Matrix values_;
};

/// Sorted distinct corners of all occupied voxels.
std::vector<VertexKey> collect_vertices(const VoxelWorld& world);

/// Entries drawn i.i.d. from U[-scale, scale] in sorted-key order.
FeatureTable init_features(const VoxelWorld& world, int dim, std::uint64_t seed, double scale = 0.1);

/// Corner rows and trilinear weights of point `p` inside voxel `v`.
/// Corner k has offset (k & 1, (k >> 1) & 1, (k >> 2) & 1).
struct CornerStencil {
    std::array<std::uint32_t, 8> index{};
    std::array<double, 8> weight{};
};
CornerStencil corner_stencil(const FeatureTable& table, VoxelCoord v, Vec3 p);

struct LocationCode {
    std::vector<double> code;
    LabelId label;
};

/// Interpolated corner features at `p` inside voxel `v`; nullopt if `v` is empty.
std::optional<LocationCode> location_code_in(const VoxelWorld& world, const FeatureTable& table,
                                             VoxelCoord v, Vec3 p);
/// Same, with the voxel found by flooring `p`.
std::optional<LocationCode> location_code(const VoxelWorld& world, const FeatureTable& table, Vec3 p);

} // namespace voxelfield
