#pragma once

// Brute-force fixed-step ray march. Deliberately shares nothing with the face-stepping
// traversal beyond VoxelWorld lookups, so it can serve as its oracle.

#include <vector>

#include "voxelfield/traversal.hpp"

namespace voxelfield::reference {

struct Interval {
    double t_begin = 0.0;
    double t_end = 0.0;
};

/// Occupied intervals found by probing floor(o + t v) every `step` along the ray, from t = 0
/// until the ray leaves the grid box.
std::vector<Interval> march_intervals(const VoxelWorld& world, const Ray& ray, double step = 1e-3);

/// Adjacent traversal segments merged into maximal intervals.
std::vector<Interval> merge_segments(const SegmentList& list, double gap = 1e-12);

struct Comparison {
    std::size_t probes = 0;
    std::size_t membership_mismatches = 0; // probes where the two disagree on the occupied voxel
    std::size_t unmatched_boundaries = 0;  // traversal interval ends with no oracle end within tol
    double max_boundary_error = 0.0;
};

/// Compares traversal output against the march. A probe counts as a mismatch when the voxel the
/// traversal assigns to that t differs from the probe's cell, skipping probes within `guard` of a
/// traversal boundary. Intervals shorter than two steps cannot be resolved by the march and are
/// exempt from the boundary check.
Comparison compare_with_march(const VoxelWorld& world, const Ray& ray, const SegmentList& list,
                              double step = 1e-3, double boundary_tol = 1e-3, double guard = 1e-9);

} // namespace voxelfield::reference
