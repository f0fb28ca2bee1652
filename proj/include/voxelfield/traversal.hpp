#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "voxelfield/vec3.hpp"
#include "voxelfield/voxel_world.hpp"

namespace voxelfield {

struct Ray {
    Vec3 origin;
    Vec3 direction; // unit length

    Vec3 at(double t) const { return origin + direction * t; }
};

/// Builds a ray with the direction normalized. Throws on a zero direction.
Ray make_ray(Vec3 origin, Vec3 direction);

struct Segment {
    double t_enter = 0.0;
    double t_exit = 0.0;
    VoxelCoord voxel;
    LabelId label;
    // Axis of the face the ray entered through; -1 when the ray starts inside the voxel.
    int entry_axis = -1;

    double length() const { return t_exit - t_enter; }
};

/// In-voxel intervals of a ray, one per occupied voxel, in increasing t.
struct SegmentList {
    std::vector<Segment> segments;
    bool truncated = false;
    double t_max = std::numeric_limits<double>::infinity();

    double total_length() const;
    bool empty() const { return segments.empty(); }
};

/// Face-stepping grid walk. Visits every cell the ray passes through inside the grid bounds and
/// records the occupied ones. Ties between axes step x before y before z.
SegmentList traverse(const VoxelWorld& world, const Ray& ray);

/// Caps the cumulative in-voxel length at `d_max`. The list is marked truncated when there was
/// more in-voxel length than `d_max`.
SegmentList truncate(SegmentList segments, double d_max = 3.0);

struct Sample {
    Vec3 position;
    double t = 0.0;     // ray parameter of the sample
    double delta = 0.0; // bin width in in-voxel arclength
    VoxelCoord voxel;
    LabelId label;
};

using SampleSet = std::vector<Sample>;

/// Splits the total in-voxel length into `jitter.size()` equal bins and places sample k at
/// fraction jitter[k] of bin k. Jitter values must lie in [0, 1).
SampleSet stratified_sample(const Ray& ray, const SegmentList& segments, std::span<const double> jitter);

/// Jittered stratified samples drawn from `rng`.
SampleSet stratified_sample(const Ray& ray, const SegmentList& segments, int n, std::mt19937_64& rng);

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Independent generator for one pixel of one frame.
std::mt19937_64 pixel_rng(std::uint64_t frame_seed, std::uint64_t pixel_index);

} // namespace voxelfield
