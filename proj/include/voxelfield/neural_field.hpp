#pragma once

#include <span>
#include <string>
#include <vector>

#include "voxelfield/autodiff.hpp"
#include "voxelfield/labels.hpp"
#include "voxelfield/model.hpp"
#include "voxelfield/tensor.hpp"
#include "voxelfield/vec3.hpp"

namespace voxelfield {

// Row vectors: a style code is 1 x style_dim, a style feature 1 x style_feature_dim.
using StyleCode = Matrix;
using StyleFeature = Matrix;

/// Deterministic N(0, 1) style code.
StyleCode sample_style_code(int dim, std::uint64_t seed);

struct ModLinearParams {
    Matrix weight;     // out x in
    Matrix bias;       // 1 x out
    Matrix style_map;  // in x w_dim
    Matrix style_bias; // 1 x in
};

/// Reads the four tensors stored under `<prefix>.weight` etc.
ModLinearParams mod_linear_params(const Model& model, std::string_view group, const std::string& prefix);

// ---- tape-level forward passes ---------------------------------------------------------------

struct ModLinearVars {
    ad::Var weight, bias, style_map, style_bias;
};
ModLinearVars bind_mod_linear(const BoundModel& bound, std::string_view group, const std::string& prefix);

/// x (N x in) through a modulated, demodulated linear layer: s = w A^T + a0, W'' = demod(W * s),
/// out = x W''^T + b.
ad::Var mod_linear(ad::Tape& t, ad::Var x, ad::Var w, const ModLinearVars& layer, double eps);

ad::Var style_forward(ad::Tape& t, const BoundModel& bound, ad::Var z);

struct FieldVars {
    ad::Var color;   // N x color_dim, before clipping
    ad::Var density; // N x 1, softplus output
};

/// `codes` is N x feature_dim interpolated vertex features. Density goes through the style-free
/// trunk only; the color branch is modulated by `w`.
FieldVars field_forward(ad::Tape& t, const BoundModel& bound, ad::Var codes, std::span<const LabelClass> labels,
                        ad::Var w);

/// `directions` is N x 3 unit vectors.
ad::Var sky_forward(ad::Tape& t, const BoundModel& bound, ad::Var directions, ad::Var w);

// ---- single-point evaluation -----------------------------------------------------------------

StyleFeature style_network(const Model& model, const StyleCode& z);

/// [sin(2^k pi u), cos(2^k pi u) for k < n_freq] over the first `n_encoded` entries, followed by
/// the remaining entries unchanged.
std::vector<double> positional_encode_partial(std::span<const double> code, int n_encoded, int n_freq);

/// Dense evaluation of one modulated layer; `x` is N x in, `w` 1 x w_dim.
Matrix mod_linear(const Matrix& x, const StyleFeature& w, const ModLinearParams& params, double eps);

struct FieldSample {
    std::vector<double> color; // before clipping
    double density = 0.0;
};
/// Field at one location code (raw, before encoding).
FieldSample field_eval(const Model& model, std::span<const double> code, LabelClass label, const StyleFeature& w);

std::vector<double> sky_eval(const Model& model, Vec3 direction, const StyleFeature& w);

} // namespace voxelfield
