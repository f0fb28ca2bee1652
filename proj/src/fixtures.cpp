#include "voxelfield/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "voxelfield/traversal.hpp"

namespace voxelfield::fixtures {

namespace {

bool exposed(const VoxelWorld& w, VoxelCoord c) {
    static constexpr int kOffsets[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    const auto dims = w.dims();
    for (const auto& o : kOffsets) {
        const VoxelCoord n{c.x + o[0], c.y + o[1], c.z + o[2]};
        if (n.y >= dims[1]) return true;
        if (w.in_bounds(n) && !w.occupied(n)) return true;
    }
    return false;
}

} // namespace

Terrain terrain(int dim_x, int dim_y, int dim_z, std::uint64_t seed) {
    Terrain t{VoxelWorld(dim_x, dim_y, dim_z)};
    std::mt19937_64 rng(seed);
    const double phase_a = uniform01(rng) * 6.283185307179586;
    const double phase_b = uniform01(rng) * 6.283185307179586;
    const int sea_level = std::max(1, dim_y / 4);
    const int base = dim_y / 3;
    const int amplitude = std::max(1, dim_y / 3);

    std::vector<int> heights(static_cast<std::size_t>(dim_x) * dim_z);
    for (int x = 0; x < dim_x; ++x) {
        for (int z = 0; z < dim_z; ++z) {
            const double h = base + amplitude * (0.6 * std::sin(0.31 * x + phase_a) * std::cos(0.23 * z + phase_b) +
                                                 0.4 * std::sin(0.17 * (x + z) + phase_b));
            const int top = std::clamp(static_cast<int>(std::lround(h)), 0, dim_y - 2);
            heights[static_cast<std::size_t>(x) * dim_z + z] = top;
            for (int y = 0; y <= top; ++y) {
                LabelClass cls = LabelClass::Stone;
                if (y == top) {
                    if (top <= sea_level) cls = LabelClass::Sand;
                    else if (top >= dim_y - 4) cls = LabelClass::Snow;
                    else cls = LabelClass::Grass;
                } else if (y >= top - 2) {
                    cls = LabelClass::Dirt;
                } else if (y < 2) {
                    cls = LabelClass::Rock;
                }
                t.voxel_count += t.world.insert({x, y, z}, cls) ? 1 : 0;
            }
            for (int y = top + 1; y < sea_level; ++y) t.voxel_count += t.world.insert({x, y, z}, LabelClass::Water) ? 1 : 0;
        }
    }

    // Trees: trunk of 3 plus a leaf cap, on grass away from the border.
    std::uniform_int_distribution<int> px(2, std::max(2, dim_x - 3));
    std::uniform_int_distribution<int> pz(2, std::max(2, dim_z - 3));
    for (int i = 0; i < std::max(1, dim_x * dim_z / 200); ++i) {
        const int x = px(rng), z = pz(rng);
        const int top = heights[static_cast<std::size_t>(x) * dim_z + z];
        if (top + 5 >= dim_y || t.world.find({x, top, z})->cls != LabelClass::Grass) continue;
        for (int y = top + 1; y <= top + 3; ++y) t.voxel_count += t.world.insert({x, y, z}, LabelClass::Tree) ? 1 : 0;
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dz = -1; dz <= 1; ++dz) {
                const VoxelCoord leaf{x + dx, top + 4, z + dz};
                if (t.world.in_bounds(leaf)) t.voxel_count += t.world.insert(leaf, LabelClass::Tree) ? 1 : 0;
            }
        }
    }

    for (const auto& [c, label] : t.world.sorted_voxels()) {
        if (exposed(t.world, c)) ++t.exposed_count;
    }
    return t;
}

VoxelWorld random_world(int size, double occupancy, std::uint64_t seed) {
    VoxelWorld w(size, size, size);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> cls(static_cast<int>(LabelClass::Tree), static_cast<int>(LabelClass::Snow));
    for (int x = 0; x < size; ++x) {
        for (int y = 0; y < size; ++y) {
            for (int z = 0; z < size; ++z) {
                if (uniform01(rng) < occupancy) w.insert({x, y, z}, static_cast<LabelClass>(cls(rng)));
            }
        }
    }
    return w;
}

VoxelWorld training_world() {
    VoxelWorld w(8, 8, 8);
    for (int x = 0; x < 8; ++x) {
        for (int z = 0; z < 8; ++z) {
            const int top = 1 + ((x / 3 + z / 2) % 3);
            for (int y = 0; y <= top; ++y) {
                LabelClass cls = y == 0 ? LabelClass::Stone : LabelClass::Dirt;
                if (y == top) cls = x < 3 ? LabelClass::Grass : (z < 4 ? LabelClass::Sand : LabelClass::Snow);
                w.insert({x, y, z}, cls);
            }
        }
    }
    // Pond: replace the surface of a 2 x 2 patch with water.
    for (int x = 5; x < 7; ++x) {
        for (int z = 1; z < 3; ++z) {
            const int top = w.column_top(x, z);
            w.erase({x, top, z});
            w.insert({x, top, z}, LabelClass::Water);
        }
    }
    // Tree.
    const int base = w.column_top(1, 5);
    for (int y = base + 1; y <= base + 2; ++y) w.insert({1, y, 5}, LabelClass::Tree);
    for (int dx = -1; dx <= 1; ++dx) {
        for (int dz = -1; dz <= 1; ++dz) w.insert({1 + dx, base + 3, 5 + dz}, LabelClass::Tree);
    }
    return w;
}

VoxelWorld two_voxel_world() {
    VoxelWorld w(2, 1, 1);
    w.insert({0, 0, 0}, LabelClass::Grass);
    w.insert({1, 0, 0}, LabelClass::Stone);
    return w;
}

CameraPose two_voxel_camera() {
    CameraPose c;
    c.eye = Vec3{-1.6, 0.55, 0.45};
    c.look_at = Vec3{1.0, 0.5, 0.5};
    c.fov_y = 0.9;
    c.width = 4;
    c.height = 4;
    return c;
}

} // namespace voxelfield::fixtures
