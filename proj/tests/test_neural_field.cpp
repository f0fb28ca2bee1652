#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fd_check.hpp"
#include "voxelfield/fixtures.hpp"
#include "voxelfield/neural_field.hpp"

using namespace voxelfield;
using testing::random_matrix;

namespace {

Model small_model(std::uint64_t seed = 5) {
    ModelConfig cfg;
    return init_model(fixtures::two_voxel_world(), cfg, seed);
}

std::vector<double> random_code(int dim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    std::vector<double> c(static_cast<std::size_t>(dim));
    for (double& v : c) v = u(rng);
    return c;
}

// Plain loops, written from the layer definitions.
std::vector<double> dense(const std::vector<double>& x, const Matrix& w, const Matrix& b) {
    std::vector<double> out(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        double acc = b(0, r);
        for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * x[static_cast<std::size_t>(c)];
        out[static_cast<std::size_t>(r)] = acc;
    }
    return out;
}

std::vector<double> leaky(std::vector<double> x, double slope) {
    for (double& v : x) v = v > 0 ? v : slope * v;
    return x;
}

std::vector<double> modulated(const std::vector<double>& x, const std::vector<double>& wvec, const ModLinearParams& p,
                              double eps) {
    const std::vector<double> s = dense(wvec, p.style_map, p.style_bias);
    std::vector<double> out(static_cast<std::size_t>(p.weight.rows()));
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r) {
        double norm2 = 0.0;
        for (Eigen::Index c = 0; c < p.weight.cols(); ++c) {
            const double v = p.weight(r, c) * s[static_cast<std::size_t>(c)];
            norm2 += v * v;
        }
        const double inv = 1.0 / std::sqrt(norm2 + eps);
        double acc = p.bias(0, r);
        for (Eigen::Index c = 0; c < p.weight.cols(); ++c) {
            acc += p.weight(r, c) * s[static_cast<std::size_t>(c)] * inv * x[static_cast<std::size_t>(c)];
        }
        out[static_cast<std::size_t>(r)] = acc;
    }
    return out;
}

FieldSample field_oracle(const Model& m, const std::vector<double>& code, LabelClass label, const StyleFeature& w) {
    const ModelConfig& cfg = m.config;
    std::vector<double> h;
    for (int k = 0; k < cfg.n_freq; ++k)
        for (int j = 0; j < cfg.encoded_channels; ++j) h.push_back(std::sin(std::pow(2.0, k) * std::numbers::pi * code[j]));
    for (int k = 0; k < cfg.n_freq; ++k)
        for (int j = 0; j < cfg.encoded_channels; ++j) h.push_back(std::cos(std::pow(2.0, k) * std::numbers::pi * code[j]));
    for (int j = cfg.encoded_channels; j < cfg.feature_dim; ++j) h.push_back(code[j]);
    const Matrix& emb = m.params.at(kFieldGroup, "label_embedding");
    for (Eigen::Index j = 0; j < emb.cols(); ++j) h.push_back(emb(class_index(label), j));

    for (int i = 0; i < cfg.trunk_layers; ++i) {
        const std::string p = "trunk" + std::to_string(i);
        h = leaky(dense(h, m.params.at(kFieldGroup, p + ".weight"), m.params.at(kFieldGroup, p + ".bias")),
                  cfg.leaky_slope);
    }
    const double raw =
        dense(h, m.params.at(kFieldGroup, "density.weight"), m.params.at(kFieldGroup, "density.bias"))[0];
    FieldSample out;
    out.density = raw > 30 ? raw : std::log1p(std::exp(raw));
    const std::vector<double> wv(w.data(), w.data() + w.size());
    std::vector<double> c = h;
    for (int i = 0; i < cfg.feature_layers; ++i) {
        c = modulated(c, wv, mod_linear_params(m, kFieldGroup, "feat" + std::to_string(i)), cfg.demod_eps);
        if (i + 1 < cfg.feature_layers) c = leaky(c, cfg.leaky_slope);
    }
    out.color = c;
    return out;
}

} // namespace

TEST_CASE("model dimensions") {
    const Model m = small_model();
    CHECK(m.config.encoded_width() == 232);
    CHECK(m.config.field_input_width() == 240);
    CHECK(m.config.sky_input_width() == 27);
    CHECK(m.features.size() == 12);
    CHECK(m.features.dim() == 64);
}

TEST_CASE("partial positional encoding") {
    std::vector<double> code(64, 0.0);
    const auto e = positional_encode_partial(code, 24, 4);
    REQUIRE(e.size() == 232);
    for (std::size_t i = 0; i < 96; ++i) CHECK(e[i] == 0.0);
    for (std::size_t i = 96; i < 192; ++i) CHECK(e[i] == 1.0);
    for (std::size_t i = 192; i < 232; ++i) CHECK(e[i] == 0.0);

    const std::vector<double> small{0.25, 0.5, 7.0};
    const auto s = positional_encode_partial(small, 2, 2);
    REQUIRE(s.size() == 9);
    CHECK(s[0] == doctest::Approx(std::sin(0.25 * std::numbers::pi)));
    CHECK(s[1] == doctest::Approx(1.0));
    CHECK(s[2] == doctest::Approx(1.0)); // sin(2 pi 0.25)
    CHECK(std::abs(s[3]) < 1e-15);       // sin(2 pi 0.5)
    CHECK(s[4] == doctest::Approx(std::cos(0.25 * std::numbers::pi)));
    CHECK(std::abs(s[5]) < 1e-15);
    CHECK(std::abs(s[6]) < 1e-15);
    CHECK(s[7] == doctest::Approx(-1.0)); // cos(2 pi 0.5)
    CHECK(s[8] == 7.0);
    CHECK_THROWS(positional_encode_partial(small, 4, 2));
}

TEST_CASE("style network") {
    Model m = small_model();
    const StyleCode z = sample_style_code(16, 3);
    CHECK(z == sample_style_code(16, 3));
    CHECK(z != sample_style_code(16, 4));
    m.params.at(kStyleGroup, "l1.weight").setZero();
    m.params.at(kStyleGroup, "l1.bias").setConstant(0.25);
    const StyleFeature w = style_network(m, z);
    CHECK(w.cols() == 32);
    CHECK(w == Matrix::Constant(1, 32, 0.25));
    CHECK_THROWS(style_network(m, sample_style_code(3, 1)));
}

TEST_CASE("modulated linear layer") {
    std::mt19937_64 rng(12);
    ModLinearParams p{random_matrix(4, 6, rng), random_matrix(1, 4, rng), random_matrix(6, 5, rng),
                      random_matrix(1, 6, rng)};
    const Matrix x = random_matrix(3, 6, rng);
    const StyleFeature w = random_matrix(1, 5, rng);

    SUBCASE("matches a straight-line evaluation") {
        const Matrix out = mod_linear(x, w, p, 1e-8);
        const std::vector<double> wv(w.data(), w.data() + w.size());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const std::vector<double> xi(x.row(i).data(), x.row(i).data() + x.cols());
            const auto ref = modulated(xi, wv, p, 1e-8);
            for (Eigen::Index r = 0; r < 4; ++r) CHECK(std::abs(out(i, r) - ref[static_cast<std::size_t>(r)]) < 1e-12);
        }
    }
    SUBCASE("unit modulation of unit rows is a plain linear layer") {
        p.style_map.setZero();
        p.style_bias.setOnes();
        for (Eigen::Index r = 0; r < p.weight.rows(); ++r) p.weight.row(r).normalize();
        const Matrix out = mod_linear(x, w, p, 0.0);
        const Matrix plain = (x * p.weight.transpose()).rowwise() + p.bias.row(0);
        CHECK((out - plain).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("demodulation cancels a uniform scale of the modulation") {
        p.style_map.setZero();
        const Matrix a = mod_linear(x, w, p, 0.0);
        p.style_bias *= 2.0;
        const Matrix b = mod_linear(x, w, p, 0.0);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
    }
    SUBCASE("demodulated rows have unit norm") {
        ad::Tape t;
        const ad::Var s = ad::linear(t, t.constant(w), t.constant(p.style_map), t.constant(p.style_bias));
        const Matrix wm = t.value(ad::modulated_weight(t, t.constant(p.weight), s, 0.0));
        for (Eigen::Index r = 0; r < wm.rows(); ++r) CHECK(wm.row(r).norm() == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("field evaluation matches a scalar re-implementation") {
    const Model m = small_model(8);
    std::mt19937_64 rng(31);
    const StyleFeature w = style_network(m, sample_style_code(16, 2));
    for (int trial = 0; trial < 10; ++trial) {
        const auto code = random_code(64, rng);
        const LabelClass label = static_cast<LabelClass>(1 + trial % 11);
        const FieldSample got = field_eval(m, code, label, w);
        const FieldSample want = field_oracle(m, code, label, w);
        REQUIRE(got.color.size() == 8);
        CHECK(got.density == doctest::Approx(want.density).epsilon(1e-12));
        for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(got.color[c] - want.color[c]) < 1e-12);
    }
}

TEST_CASE("density is non-negative and independent of style") {
    const Model m = small_model(9);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto code = random_code(64, rng);
        const auto a = field_eval(m, code, LabelClass::Grass, style_network(m, sample_style_code(16, trial)));
        const auto b = field_eval(m, code, LabelClass::Grass, style_network(m, sample_style_code(16, trial + 100)));
        CHECK(a.density >= 0.0);
        CHECK(a.density == b.density);
    }

    // Gradient of the density with respect to the style code is exactly zero.
    ad::Tape t;
    const BoundModel bound(t, m);
    const ad::Var z = t.leaf(sample_style_code(16, 1));
    const ad::Var w = style_forward(t, bound, z);
    const Matrix codes = random_matrix(5, 64, rng, -0.1, 0.1);
    const std::vector<LabelClass> labels(5, LabelClass::Stone);
    const FieldVars f = field_forward(t, bound, t.constant(codes), labels, w);
    t.backward(ad::sum(t, f.density));
    CHECK(t.grad(z).cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.grad(w).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero feature head yields its bias") {
    Model m = small_model(4);
    m.params.at(kFieldGroup, "feat1.weight").setZero();
    m.params.at(kFieldGroup, "feat1.bias").setConstant(0.3);
    std::mt19937_64 rng(2);
    const auto s = field_eval(m, random_code(64, rng), LabelClass::Sand, style_network(m, sample_style_code(16, 1)));
    for (double c : s.color) CHECK(c == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("sky network") {
    const Model m = small_model(6);
    const StyleFeature w = style_network(m, sample_style_code(16, 7));
    const Vec3 v = normalized(Vec3{0.3, 0.8, -0.2});
    const auto a = sky_eval(m, v, w);
    CHECK(a == sky_eval(m, v, w));
    REQUIRE(a.size() == 8);
    for (double c : a) CHECK(std::abs(c) <= 1.0);
    const auto b = sky_eval(m, -v, w);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
    CHECK(diff > 1e-6);
}
