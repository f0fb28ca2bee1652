#pragma once

#include <span>

namespace voxelfield {

/// Discrete volume-rendering weights for one ray:
///   T_i = exp(-sum_{j<i} sigma_j delta_j),  w_i = T_i (1 - exp(-sigma_i delta_i)),
/// writing T_i and w_i per sample and returning the residual transmittance T_{N+1}.
double quadrature_weights(std::span<const double> sigma, std::span<const double> delta,
                          std::span<double> transmittance, std::span<double> weight);

} // namespace voxelfield
