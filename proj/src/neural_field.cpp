#include "voxelfield/neural_field.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace voxelfield {

StyleCode sample_style_code(int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    StyleCode z(1, dim);
    for (int i = 0; i < dim; ++i) z(0, i) = normal(rng);
    return z;
}

ModLinearParams mod_linear_params(const Model& model, std::string_view group, const std::string& prefix) {
    const auto& p = model.params;
    return ModLinearParams{p.at(group, prefix + ".weight"), p.at(group, prefix + ".bias"),
                           p.at(group, prefix + ".style_map"), p.at(group, prefix + ".style_bias")};
}

ModLinearVars bind_mod_linear(const BoundModel& bound, std::string_view group, const std::string& prefix) {
    return ModLinearVars{bound(group, prefix + ".weight"), bound(group, prefix + ".bias"),
                         bound(group, prefix + ".style_map"), bound(group, prefix + ".style_bias")};
}

ad::Var mod_linear(ad::Tape& t, ad::Var x, ad::Var w, const ModLinearVars& layer, double eps) {
    const ad::Var s = ad::linear(t, w, layer.style_map, layer.style_bias);
    const ad::Var weight = ad::modulated_weight(t, layer.weight, s, eps);
    return ad::linear(t, x, weight, layer.bias);
}

ad::Var style_forward(ad::Tape& t, const BoundModel& bound, ad::Var z) {
    const double slope = bound.config().leaky_slope;
    ad::Var h = ad::linear(t, z, bound(kStyleGroup, "l0.weight"), bound(kStyleGroup, "l0.bias"));
    h = ad::leaky_relu(t, h, slope);
    return ad::linear(t, h, bound(kStyleGroup, "l1.weight"), bound(kStyleGroup, "l1.bias"));
}

FieldVars field_forward(ad::Tape& t, const BoundModel& bound, ad::Var codes, std::span<const LabelClass> labels,
                        ad::Var w) {
    const ModelConfig& cfg = bound.config();
    if (t.value(codes).cols() != cfg.feature_dim) throw std::invalid_argument("field_forward: code width mismatch");
    if (static_cast<std::size_t>(t.value(codes).rows()) != labels.size()) {
        throw std::invalid_argument("field_forward: one label per code required");
    }

    std::vector<std::uint32_t> label_rows(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) label_rows[i] = static_cast<std::uint32_t>(class_index(labels[i]));
    const ad::Var embedded = ad::gather_rows(t, bound(kFieldGroup, "label_embedding"), std::move(label_rows));
    const ad::Var encoded = ad::positional_encoding(t, codes, cfg.encoded_channels, cfg.n_freq);
    const ad::Var parts[] = {encoded, embedded};
    ad::Var h = ad::concat_cols(t, parts);

    for (int i = 0; i < cfg.trunk_layers; ++i) {
        const std::string prefix = "trunk" + std::to_string(i);
        h = ad::linear(t, h, bound(kFieldGroup, prefix + ".weight"), bound(kFieldGroup, prefix + ".bias"));
        h = ad::leaky_relu(t, h, cfg.leaky_slope);
    }
    const ad::Var raw_density = ad::linear(t, h, bound(kFieldGroup, "density.weight"), bound(kFieldGroup, "density.bias"));

    ad::Var c = h;
    for (int i = 0; i < cfg.feature_layers; ++i) {
        c = mod_linear(t, c, w, bind_mod_linear(bound, kFieldGroup, "feat" + std::to_string(i)), cfg.demod_eps);
        if (i + 1 < cfg.feature_layers) c = ad::leaky_relu(t, c, cfg.leaky_slope);
    }
    return FieldVars{c, ad::softplus(t, raw_density)};
}

ad::Var sky_forward(ad::Tape& t, const BoundModel& bound, ad::Var directions, ad::Var w) {
    const ModelConfig& cfg = bound.config();
    if (t.value(directions).cols() != 3) throw std::invalid_argument("sky_forward: directions must be N x 3");
    const ad::Var parts[] = {directions, ad::positional_encoding(t, directions, 3, cfg.sky_freq)};
    ad::Var h = ad::concat_cols(t, parts);
    h = mod_linear(t, h, w, bind_mod_linear(bound, kSkyGroup, "mod0"), cfg.demod_eps);
    h = ad::leaky_relu(t, h, cfg.leaky_slope);
    h = mod_linear(t, h, w, bind_mod_linear(bound, kSkyGroup, "mod1"), cfg.demod_eps);
    h = ad::leaky_relu(t, h, cfg.leaky_slope);
    h = ad::linear(t, h, bound(kSkyGroup, "out.weight"), bound(kSkyGroup, "out.bias"));
    return ad::tanh(t, h);
}

// ---- single-point evaluation -----------------------------------------------------------------

StyleFeature style_network(const Model& model, const StyleCode& z) {
    if (z.rows() != 1 || z.cols() != model.config.style_dim) throw std::invalid_argument("style code has wrong width");
    ad::Tape tape;
    const BoundModel bound(tape, model, false);
    return tape.value(style_forward(tape, bound, tape.constant(z)));
}

std::vector<double> positional_encode_partial(std::span<const double> code, int n_encoded, int n_freq) {
    if (n_encoded < 0 || n_freq < 0 || static_cast<std::size_t>(n_encoded) > code.size()) {
        throw std::invalid_argument("positional_encode_partial: bad channel split");
    }
    const std::size_t ne = static_cast<std::size_t>(n_encoded);
    const std::size_t block = ne * static_cast<std::size_t>(n_freq);
    std::vector<double> out(2 * block + code.size() - ne);
    for (int k = 0; k < n_freq; ++k) {
        const double f = std::ldexp(std::numbers::pi, k);
        for (std::size_t j = 0; j < ne; ++j) {
            out[k * ne + j] = std::sin(f * code[j]);
            out[block + k * ne + j] = std::cos(f * code[j]);
        }
    }
    std::copy(code.begin() + static_cast<std::ptrdiff_t>(ne), code.end(), out.begin() + static_cast<std::ptrdiff_t>(2 * block));
    return out;
}

Matrix mod_linear(const Matrix& x, const StyleFeature& w, const ModLinearParams& p, double eps) {
    ad::Tape tape;
    const ModLinearVars layer{tape.constant(p.weight), tape.constant(p.bias), tape.constant(p.style_map),
                              tape.constant(p.style_bias)};
    return tape.value(mod_linear(tape, tape.constant(x), tape.constant(w), layer, eps));
}

FieldSample field_eval(const Model& model, std::span<const double> code, LabelClass label, const StyleFeature& w) {
    if (static_cast<int>(code.size()) != model.config.feature_dim) throw std::invalid_argument("code has wrong width");
    ad::Tape tape;
    const BoundModel bound(tape, model, false);
    Matrix row(1, static_cast<Eigen::Index>(code.size()));
    for (std::size_t i = 0; i < code.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = code[i];
    const LabelClass labels[] = {label};
    const FieldVars out = field_forward(tape, bound, tape.constant(row), labels, tape.constant(w));
    const Matrix& c = tape.value(out.color);
    return FieldSample{std::vector<double>(c.data(), c.data() + c.size()), tape.value(out.density)(0, 0)};
}

std::vector<double> sky_eval(const Model& model, Vec3 direction, const StyleFeature& w) {
    ad::Tape tape;
    const BoundModel bound(tape, model, false);
    Matrix dir(1, 3);
    dir << direction.x, direction.y, direction.z;
    const Matrix& c = tape.value(sky_forward(tape, bound, tape.constant(dir), tape.constant(w)));
    return std::vector<double>(c.data(), c.data() + c.size());
}

} // namespace voxelfield
