#pragma once

#include "voxelfield/autodiff.hpp"
#include "voxelfield/model.hpp"
#include "voxelfield/neural_field.hpp"

namespace voxelfield {

// Images are (height * width) x channels matrices with row y * width + x.

enum class RefinerOutput {
    Activated, // tanh, then mapped to [0, 1]
    Linear,    // raw head output; for testing engineered weights
};

/// Stride-1 3x3 convolutions with zero padding, each followed by per-channel affine modulation
/// from `w` and a leaky ReLU, then a 1x1 head to RGB.
ad::Var refine_forward(ad::Tape& t, const BoundModel& bound, ad::Var feature, int width, int height, ad::Var w,
                       RefinerOutput output = RefinerOutput::Activated);

Matrix refine(const Model& model, const Matrix& feature, int width, int height, const StyleFeature& w,
              RefinerOutput output = RefinerOutput::Activated);

/// First three feature channels mapped from [-1, 1] to [0, 1].
ad::Var refine_bypass(ad::Tape& t, ad::Var feature);
Matrix refine_bypass(const Matrix& feature);

} // namespace voxelfield
