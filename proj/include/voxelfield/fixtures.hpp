#pragma once

#include <cstdint>

#include "voxelfield/volume_renderer.hpp"
#include "voxelfield/voxel_world.hpp"

// Procedural worlds shared by the tests, the benchmarks and the command line tool.
namespace voxelfield::fixtures {

struct Terrain {
    VoxelWorld world;
    std::size_t voxel_count = 0; // counted while generating
    std::size_t exposed_count = 0;
};

/// Height-field terrain (dims x, y, z with y up): stone core, dirt layers, a surface of grass,
/// sand or snow by altitude, water filling low ground and a few trees.
Terrain terrain(int dim_x = 32, int dim_y = 16, int dim_z = 32, std::uint64_t seed = 7);

/// Cube grid with each cell occupied with probability `occupancy` by a random non-ignore class.
VoxelWorld random_world(int size, double occupancy, std::uint64_t seed);

/// 8 x 8 x 8 world with low rolling ground, mixed surface classes, a pond and a tree.
VoxelWorld training_world();

/// Two face-adjacent voxels, (0, 0, 0) grass and (1, 0, 0) stone, in a 2 x 1 x 1 grid.
VoxelWorld two_voxel_world();

/// 4 x 4 view along +x through both voxels of two_voxel_world; the edge rays see sky.
CameraPose two_voxel_camera();

} // namespace voxelfield::fixtures
