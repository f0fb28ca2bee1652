#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxelfield/config.hpp"
#include "voxelfield/model.hpp"
#include "voxelfield/volume_renderer.hpp"

namespace voxelfield {

struct GradcheckSettings {
    double step = 1e-5;      // central difference half-width
    int per_group = 16;      // entries checked per parameter group
    double rel_floor = 1e-6; // denominator floor of the relative error
    std::uint64_t seed = 3;
    double d_max = 1.5; // short enough that rays through two voxels are truncated
    int samples = 8;
};

struct GroupCheck {
    std::string group;
    int checked = 0;
    int skipped = 0; // entries whose +-step evaluation crossed a kink
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
};

struct GradcheckReport {
    std::vector<GroupCheck> groups;
    double max_rel_error() const;
};

/// Compares the full-pipeline loss gradient (field, sky, style, refiner, vertex features) with
/// central finite differences. Half the entries per group are the largest gradients, the rest
/// are drawn at random.
GradcheckReport gradcheck(const VoxelWorld& world, const Model& model, const CameraPose& camera, const Config& config,
                          const LabelScheme& scheme, const GradcheckSettings& settings);

/// A 4 x 4 camera looking along +x at the occupied bounding box of `world`.
CameraPose gradcheck_camera(const VoxelWorld& world);

} // namespace voxelfield
