#include <doctest.h>

#include <cmath>
#include <random>

#include "fd_check.hpp"
#include "voxelfield/quadrature.hpp"

using namespace voxelfield;
using testing::fd_check;
using testing::random_matrix;

namespace {

constexpr double kTol = 1e-6;

void check_op(const char* name, const testing::OpBuilder& op, std::vector<Matrix> inputs) {
    const auto r = fd_check(op, std::move(inputs));
    INFO(name << ": max rel error " << r.max_rel_error << ", skipped " << r.skipped);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < kTol);
}

} // namespace

TEST_CASE("gradient of sum of squares") {
    ad::Tape t;
    Matrix p(2, 3);
    p << 1, -2, 3, 0.5, 0, -4;
    const ad::Var x = t.leaf(p);
    const ad::Var unused = t.leaf(Matrix::Ones(2, 2));
    t.backward(ad::sum(t, ad::square(t, x)));
    CHECK(t.grad(x) == 2.0 * p);
    CHECK(t.grad(unused) == Matrix::Zero(2, 2));
}

TEST_CASE("constants stay out of the graph") {
    ad::Tape t;
    const ad::Var c = t.constant(Matrix::Ones(1, 1));
    const ad::Var y = ad::affine(t, c, 3.0, 1.0);
    CHECK_FALSE(t.requires_grad(y));
    CHECK(t.value(y)(0, 0) == 4.0);
}

TEST_CASE("elementwise ops match finite differences") {
    std::mt19937_64 rng(1);
    const Matrix a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng);
    const Matrix row = random_matrix(1, 4, rng);
    using V = const std::vector<ad::Var>&;
    check_op("add", [](ad::Tape& t, V v) { return ad::add(t, v[0], v[1]); }, {a, b});
    check_op("sub", [](ad::Tape& t, V v) { return ad::sub(t, v[0], v[1]); }, {a, b});
    check_op("mul", [](ad::Tape& t, V v) { return ad::mul(t, v[0], v[1]); }, {a, b});
    check_op("affine", [](ad::Tape& t, V v) { return ad::affine(t, v[0], -1.5, 0.25); }, {a});
    check_op("add_row", [](ad::Tape& t, V v) { return ad::add_row(t, v[0], v[1]); }, {a, row});
    check_op("mul_row", [](ad::Tape& t, V v) { return ad::mul_row(t, v[0], v[1]); }, {a, row});
    check_op("leaky_relu", [](ad::Tape& t, V v) { return ad::leaky_relu(t, v[0], 0.2); }, {a});
    check_op("softplus", [](ad::Tape& t, V v) { return ad::softplus(t, v[0]); }, {a * 5.0});
    check_op("tanh", [](ad::Tape& t, V v) { return ad::tanh(t, v[0]); }, {a * 2.0});
    check_op("exp", [](ad::Tape& t, V v) { return ad::exp(t, v[0]); }, {a});
    check_op("square", [](ad::Tape& t, V v) { return ad::square(t, v[0]); }, {a});
    check_op("abs", [](ad::Tape& t, V v) { return ad::abs(t, v[0]); }, {a});
    check_op("clamp", [](ad::Tape& t, V v) { return ad::clamp(t, v[0], -0.5, 0.5); }, {a});
    check_op("sum", [](ad::Tape& t, V v) { return ad::sum(t, v[0]); }, {a});
    check_op("mean", [](ad::Tape& t, V v) { return ad::mean(t, v[0]); }, {a});
}

TEST_CASE("linear algebra and shape ops match finite differences") {
    std::mt19937_64 rng(2);
    using V = const std::vector<ad::Var>&;
    check_op("matmul", [](ad::Tape& t, V v) { return ad::matmul(t, v[0], v[1]); },
             {random_matrix(3, 5, rng), random_matrix(5, 2, rng)});
    check_op("linear", [](ad::Tape& t, V v) { return ad::linear(t, v[0], v[1], v[2]); },
             {random_matrix(4, 5, rng), random_matrix(3, 5, rng), random_matrix(1, 3, rng)});
    check_op("concat_cols",
             [](ad::Tape& t, V v) {
                 const std::vector<ad::Var> parts{v[0], v[1], v[0]};
                 return ad::concat_cols(t, parts);
             },
             {random_matrix(3, 2, rng), random_matrix(3, 4, rng)});
    check_op("slice_cols", [](ad::Tape& t, V v) { return ad::slice_cols(t, v[0], 1, 3); },
             {random_matrix(3, 5, rng)});
    check_op("gather_rows", [](ad::Tape& t, V v) { return ad::gather_rows(t, v[0], {2, 0, 2, 1, 2}); },
             {random_matrix(4, 3, rng)});
}

TEST_CASE("domain ops match finite differences") {
    std::mt19937_64 rng(3);
    using V = const std::vector<ad::Var>&;
    check_op("positional_encoding", [](ad::Tape& t, V v) { return ad::positional_encoding(t, v[0], 3, 4); },
             {random_matrix(4, 5, rng)});
    check_op("modulated_weight", [](ad::Tape& t, V v) { return ad::modulated_weight(t, v[0], v[1], 1e-8); },
             {random_matrix(4, 6, rng), random_matrix(1, 6, rng, 0.2, 2.0)});

    std::vector<std::array<std::uint32_t, 8>> corners(5);
    std::vector<std::array<double, 8>> weights(5);
    std::uniform_int_distribution<std::uint32_t> pick(0, 9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 5; ++i) {
        double total = 0.0;
        for (int k = 0; k < 8; ++k) {
            corners[i][k] = pick(rng);
            weights[i][k] = u(rng);
            total += weights[i][k];
        }
        for (double& w : weights[i]) w /= total;
    }
    check_op("trilinear", [&](ad::Tape& t, V v) { return ad::trilinear(t, v[0], corners, weights); },
             {random_matrix(10, 3, rng)});

    const std::vector<double> deltas{0.2, 0.5, 0.1, 0.3, 0.7, 0.4, 0.25};
    const std::vector<std::size_t> offsets{0, 3, 3, 7};
    check_op("composite",
             [&](ad::Tape& t, V v) { return ad::composite(t, v[0], v[1], v[2], deltas, offsets); },
             {random_matrix(7, 1, rng, 0.05, 3.0), random_matrix(7, 4, rng), random_matrix(3, 4, rng)});

    check_op("im2col", [](ad::Tape& t, V v) { return ad::im2col(t, v[0], 3, 4, 3); },
             {random_matrix(12, 2, rng)});
}

TEST_CASE("composite forward values") {
    ad::Tape t;
    Matrix sigma(2, 1), color(2, 1), sky(1, 1);
    sigma << 1.0, 2.0;
    color << 0.3, 0.9;
    sky << 0.5;
    const std::vector<double> deltas{0.5, 0.25};
    const ad::Var out = ad::composite(t, t.constant(sigma), t.constant(color), t.constant(sky), deltas, {0, 2});
    const double t1 = 1.0, t2 = std::exp(-0.5), t3 = std::exp(-1.0);
    const double w1 = t1 * (1 - std::exp(-0.5)), w2 = t2 * (1 - std::exp(-0.5));
    CHECK(t.value(out)(0, 0) == doctest::Approx(w1 * 0.3 + w2 * 0.9 + t3 * 0.5).epsilon(1e-14));
    CHECK(t.value(out)(0, 1) == doctest::Approx(t3).epsilon(1e-14));
}

TEST_CASE("im2col layout") {
    ad::Tape t;
    Matrix img(4, 1);
    img << 1, 2, 3, 4; // 2 x 2 image
    const Matrix p = t.value(ad::im2col(t, t.constant(img), 2, 2, 3));
    REQUIRE(p.rows() == 4);
    REQUIRE(p.cols() == 9);
    // Pixel (0, 0): neighbors with zero padding, ky-major then kx.
    Matrix expected(1, 9);
    expected << 0, 0, 0, 0, 1, 2, 0, 3, 4;
    CHECK(p.row(0) == expected);
}

TEST_CASE("quadrature weights") {
    const std::vector<double> sigma{0.0, 1.0, 1e9}, delta{1.0, 1.0, 1.0};
    std::vector<double> trans(3), weight(3);
    const double t_end = quadrature_weights(sigma, delta, trans, weight);
    CHECK(trans[0] == 1.0);
    CHECK(weight[0] == 0.0);
    CHECK(trans[1] == 1.0);
    CHECK(weight[1] == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
    CHECK(weight[2] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(t_end == 0.0);
}

TEST_CASE("branch signature tracks kinks") {
    auto signature = [](double x) {
        ad::Tape t;
        Matrix m(1, 1);
        m << x;
        ad::leaky_relu(t, t.leaf(m));
        return t.branch_signature();
    };
    CHECK(signature(0.5) == signature(0.7));
    CHECK(signature(0.5) != signature(-0.5));
}
