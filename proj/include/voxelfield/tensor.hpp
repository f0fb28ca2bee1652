#pragma once

#include <Eigen/Core>

namespace voxelfield {

// Dense row-major storage shared by parameters, activations and feature tables.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace voxelfield
