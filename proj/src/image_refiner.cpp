#include "voxelfield/image_refiner.hpp"

#include <stdexcept>
#include <string>

namespace voxelfield {

ad::Var refine_forward(ad::Tape& t, const BoundModel& bound, ad::Var feature, int width, int height, ad::Var w,
                       RefinerOutput output) {
    const ModelConfig& cfg = bound.config();
    const Matrix& f = t.value(feature);
    if (width < 1 || height < 1 || f.rows() != static_cast<Eigen::Index>(width) * height) {
        throw std::invalid_argument("refine: feature map does not match the image size");
    }
    if (f.cols() != cfg.color_dim) throw std::invalid_argument("refine: feature map has the wrong channel count");

    ad::Var h = feature;
    for (int i = 0; i < cfg.refiner_layers; ++i) {
        const std::string prefix = "conv" + std::to_string(i);
        const ad::Var patches = ad::im2col(t, h, height, width, 3);
        h = ad::linear(t, patches, bound(kRefinerGroup, prefix + ".weight"), bound(kRefinerGroup, prefix + ".bias"));
        const ad::Var gamma = ad::linear(t, w, bound(kRefinerGroup, prefix + ".scale_map"),
                                         bound(kRefinerGroup, prefix + ".scale_bias"));
        const ad::Var beta = ad::linear(t, w, bound(kRefinerGroup, prefix + ".shift_map"),
                                        bound(kRefinerGroup, prefix + ".shift_bias"));
        h = ad::add_row(t, ad::mul_row(t, h, gamma), beta);
        h = ad::leaky_relu(t, h, cfg.leaky_slope);
    }
    h = ad::linear(t, h, bound(kRefinerGroup, "head.weight"), bound(kRefinerGroup, "head.bias"));
    if (output == RefinerOutput::Linear) return h;
    return ad::affine(t, ad::tanh(t, h), 0.5, 0.5);
}

Matrix refine(const Model& model, const Matrix& feature, int width, int height, const StyleFeature& w,
              RefinerOutput output) {
    ad::Tape tape;
    const BoundModel bound(tape, model, false);
    return tape.value(refine_forward(tape, bound, tape.constant(feature), width, height, tape.constant(w), output));
}

ad::Var refine_bypass(ad::Tape& t, ad::Var feature) {
    if (t.value(feature).cols() < 3) throw std::invalid_argument("refine_bypass: need at least 3 channels");
    return ad::affine(t, ad::slice_cols(t, feature, 0, 3), 0.5, 0.5);
}

Matrix refine_bypass(const Matrix& feature) {
    if (feature.cols() < 3) throw std::invalid_argument("refine_bypass: need at least 3 channels");
    return (feature.leftCols(3).array() * 0.5 + 0.5).matrix();
}

} // namespace voxelfield
