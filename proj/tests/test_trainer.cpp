#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "voxelfield/fixtures.hpp"
#include "voxelfield/trainer.hpp"

using namespace voxelfield;

namespace {

Config quick_config(int iterations = 3) {
    Config c;
    c.iterations = iterations;
    c.train_width = 12;
    c.train_height = 12;
    c.train_samples = 8;
    c.checkpoint_every = 0;
    return c;
}

FrameBuffers flat_frames(std::size_t pixels, std::vector<double> t_out, std::vector<std::uint8_t> truncated) {
    FrameBuffers f;
    f.width = static_cast<int>(pixels);
    f.height = 1;
    f.t_out = std::move(t_out);
    f.truncated = std::move(truncated);
    return f;
}

} // namespace

TEST_CASE("oracle shades top faces and blends the sky") {
    VoxelWorld world(3, 3, 3);
    world.insert({1, 0, 1}, LabelClass::Grass);
    const LabelScheme scheme;
    const OracleTarget oracle;

    CameraPose down;
    down.eye = Vec3{1.5, 5.0, 1.5};
    down.look_at = Vec3{1.5, 0.0, 1.5};
    down.up = Vec3{0, 0, 1};
    down.width = down.height = 1;
    down.fov_y = 0.1;
    const Matrix hit = oracle_render(world, down, oracle, scheme);
    const Vec3 l = normalized(oracle.light);
    const double shade = oracle.ambient + oracle.diffuse * std::max(0.0, l.y);
    const Rgb& a = scheme.albedo(LabelClass::Grass);
    CHECK(hit(0, 0) == doctest::Approx(std::min(1.0, a.r * shade)).epsilon(1e-14));
    CHECK(hit(0, 1) == doctest::Approx(std::min(1.0, a.g * shade)).epsilon(1e-14));
    CHECK(hit(0, 2) == doctest::Approx(std::min(1.0, a.b * shade)).epsilon(1e-14));

    CameraPose level;
    level.eye = Vec3{-5.0, 2.5, 1.5};
    level.look_at = Vec3{0.0, 2.5, 1.5};
    level.width = level.height = 1;
    const Matrix sky = oracle_render(world, level, oracle, scheme);
    CHECK(sky(0, 0) == doctest::Approx(oracle.sky_horizon.x).epsilon(1e-14));
    CHECK(sky(0, 2) == doctest::Approx(oracle.sky_horizon.z).epsilon(1e-14));

    // Side face facing -x, lit from -x.
    CameraPose side;
    side.eye = Vec3{-5.0, 0.5, 1.5};
    side.look_at = Vec3{1.5, 0.5, 1.5};
    side.width = side.height = 1;
    side.fov_y = 0.1;
    const Matrix lit = oracle_render(world, side, oracle, scheme);
    const double side_shade = oracle.ambient + oracle.diffuse * std::max(0.0, -l.x);
    CHECK(lit(0, 0) == doctest::Approx(std::min(1.0, a.r * side_shade)).epsilon(1e-14));
}

TEST_CASE("oracle output range") {
    const auto t = fixtures::terrain(16, 12, 16, 3);
    std::mt19937_64 rng(2);
    const CameraPose cam = sample_camera(t.world, rng, CameraSampling{}, 24, 24);
    const Matrix img = oracle_render(t.world, cam, OracleTarget{}, LabelScheme{});
    CHECK(img.rows() == 576);
    CHECK(img.minCoeff() >= 0.0);
    CHECK(img.maxCoeff() <= 1.0);
}

TEST_CASE("camera acceptance tests") {
    const CameraSampling sampling;
    LabelProjection all_sky;
    all_sky.seg.assign(9, LabelClass::Sky);
    all_sky.depth.assign(9, kNoDepth);
    CHECK_FALSE(check_camera(all_sky, sampling).accepted);

    LabelProjection two;
    two.seg = {LabelClass::Grass, LabelClass::Grass, LabelClass::Stone, LabelClass::Stone};
    two.depth.assign(4, 5.0);
    const CameraCheck c2 = check_camera(two, sampling);
    CHECK(c2.mean_depth == 5.0);
    CHECK(c2.entropy == doctest::Approx(std::log(2.0)));
    CHECK_FALSE(c2.accepted); // ln 2 < 0.75

    LabelProjection three;
    three.seg = {LabelClass::Grass, LabelClass::Stone, LabelClass::Sky};
    three.depth = {4.0, 2.0, kNoDepth};
    const CameraCheck c3 = check_camera(three, sampling);
    CHECK(c3.mean_depth == 3.0);
    CHECK(c3.accepted);

    three.depth = {1.0, 1.5, kNoDepth};
    CHECK_FALSE(check_camera(three, sampling).accepted); // too close
}

TEST_CASE("sampled cameras pass their own tests") {
    const VoxelWorld world = fixtures::training_world();
    std::mt19937_64 rng(4);
    const CameraSampling sampling;
    for (int i = 0; i < 20; ++i) {
        int attempts = 0;
        const CameraPose cam = sample_camera(world, rng, sampling, 16, 16, &attempts);
        CHECK(attempts >= 1);
        CHECK(attempts <= sampling.retries);
        CHECK(check_camera(project_labels(world, cam), sampling).accepted);
        const int top = world.column_top(static_cast<int>(cam.eye.x), static_cast<int>(cam.eye.z));
        CHECK(cam.eye.y >= top + 1.0 + sampling.height_min);
        CHECK(cam.eye.y <= top + 1.0 + sampling.height_max);
    }
}

TEST_CASE("degenerate worlds abort camera sampling") {
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(sample_camera(VoxelWorld(4, 4, 4), rng, CameraSampling{}, 8, 8), CameraSamplingError);
    VoxelWorld single(4, 4, 4);
    single.insert({1, 0, 1}, LabelClass::Stone);
    CameraSampling quick;
    quick.retries = 10;
    CHECK_THROWS_AS(sample_camera(single, rng, quick, 8, 8), CameraSamplingError);
}

TEST_CASE("loss examples") {
    const LossWeights w;
    Matrix target = Matrix::Constant(4, 3, 0.5);
    SUBCASE("perfect prediction, no residual") {
        const auto p = compute_loss(target, target, flat_frames(4, {0.0, 0.0, 0.0, 0.0}, {1, 1, 0, 0}), w);
        CHECK(p.total == 0.0);
    }
    SUBCASE("uniform offset") {
        const Matrix pred = target.array() + 0.2;
        const auto p = compute_loss(pred, target, flat_frames(4, {1.0, 1.0, 1.0, 1.0}, {0, 0, 0, 0}), w);
        CHECK(p.l2 == doctest::Approx(0.04).epsilon(1e-13));
        CHECK(p.l1 == doctest::Approx(0.2).epsilon(1e-13));
        CHECK(p.opacity == 0.0);
        CHECK(p.total == doctest::Approx(10.0 * 0.04 + 0.2).epsilon(1e-13));
    }
    SUBCASE("opacity term only counts truncated rays") {
        const auto p = compute_loss(target, target, flat_frames(4, {0.5, 0.25, 1.0, 1.0}, {1, 1, 0, 0}), w);
        CHECK(p.opacity == doctest::Approx(0.75 / 4.0));
        CHECK(p.total == doctest::Approx(0.5 * 0.75 / 4.0));
    }
    CHECK_THROWS(compute_loss(Matrix::Zero(2, 3), target, flat_frames(4, {1, 1, 1, 1}, {0, 0, 0, 0}), w));
}

TEST_CASE("loss decomposes and matches its tape version") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix pred(10, 3), target(10, 3), t_end(10, 1);
        std::vector<std::uint8_t> trunc(10);
        for (Eigen::Index i = 0; i < pred.size(); ++i) {
            pred.data()[i] = u(rng);
            target.data()[i] = u(rng);
        }
        std::vector<double> t_out(10);
        for (int i = 0; i < 10; ++i) {
            t_end(i, 0) = t_out[i] = u(rng);
            trunc[i] = u(rng) < 0.5;
        }
        LossWeights w;
        w.l2 = u(rng) * 20;
        w.l1 = u(rng);
        w.opacity = u(rng);
        const auto p = compute_loss(pred, target, flat_frames(10, t_out, trunc), w);
        CHECK(std::abs(p.total - (w.l2 * p.l2 + w.l1 * p.l1 + w.opacity * p.opacity)) < 1e-12);
        ad::Tape t;
        const auto vars = loss_on_tape(t, t.leaf(pred), target, t.leaf(t_end), trunc, w);
        const auto q = loss_values(t, vars);
        CHECK(std::abs(q.total - p.total) < 1e-12);
        CHECK(std::abs(q.l2 - p.l2) < 1e-12);
        CHECK(std::abs(q.l1 - p.l1) < 1e-12);
        CHECK(std::abs(q.opacity - p.opacity) < 1e-12);
    }
}

TEST_CASE("sky receives no gradient when every ray is absorbed") {
    VoxelWorld world(8, 8, 8);
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y)
            for (int z = 0; z < 8; ++z) world.insert({x, y, z}, LabelClass::Stone);
    Model m = init_model(world, ModelConfig{}, 3);
    m.params.at(kFieldGroup, "density.weight").setZero();
    m.params.at(kFieldGroup, "density.bias").setConstant(1e4);
    CameraPose cam;
    cam.eye = Vec3{4.0, 12.0, 4.0};
    cam.look_at = Vec3{4.0, 0.0, 4.0};
    cam.up = Vec3{0, 0, 1};
    cam.fov_y = 0.3;
    cam.width = cam.height = 6;
    const Config config = quick_config();
    const Matrix target = Matrix::Constant(36, 3, 0.5);
    const StepResult r = forward_backward(world, m, cam, sample_style_code(16, 1), target, config, 5);
    for (double t : r.frames.t_out) CHECK(t == 0.0);
    const auto refs = parameter_refs(m);
    bool some_field_grad = false;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].group == kSkyGroup) CHECK(r.grads[i].cwiseAbs().maxCoeff() == 0.0);
        if (refs[i].group == kFieldGroup && r.grads[i].cwiseAbs().maxCoeff() > 0.0) some_field_grad = true;
    }
    CHECK(some_field_grad);
}

TEST_CASE("forward_backward and evaluate_loss agree") {
    const VoxelWorld world = fixtures::training_world();
    const Model m = init_model(world, ModelConfig{}, 3);
    std::mt19937_64 rng(6);
    const CameraPose cam = sample_camera(world, rng, CameraSampling{}, 10, 10);
    const Config config = quick_config();
    const Matrix target = oracle_render(world, cam, config.oracle, LabelScheme{});
    const StyleCode z = sample_style_code(16, 2);
    const StepResult a = forward_backward(world, m, cam, z, target, config, 4);
    const LossProbe b = evaluate_loss(world, m, cam, z, target, config, 4);
    CHECK(a.loss.total == b.loss.total);
    CHECK(a.loss.total > 0.0);
    CHECK(a.grads.size() == parameter_refs(const_cast<Model&>(m)).size());
}

TEST_CASE("Adam updates") {
    const VoxelWorld world = fixtures::two_voxel_world();
    Model m = init_model(world, ModelConfig{}, 1);
    const Model before = m;
    Adam adam(m, 1e-4, 5e-3);
    auto refs = parameter_refs(m);

    SUBCASE("zero gradients leave parameters unchanged") {
        std::vector<Matrix> zero;
        for (const auto& r : refs) zero.push_back(Matrix::Zero(r.value->rows(), r.value->cols()));
        adam.step(zero);
        CHECK(m.features.values() == before.features.values());
        for (std::size_t i = 0; i < refs.size(); ++i) CHECK(*refs[i].value == *parameter_refs(const_cast<Model&>(before))[i].value);
    }
    SUBCASE("first step moves by the learning rate; feature/network ratio is 50") {
        std::vector<Matrix> grads;
        for (const auto& r : refs) grads.push_back(Matrix::Constant(r.value->rows(), r.value->cols(), 0.3));
        adam.step(grads);
        const auto old = parameter_refs(const_cast<Model&>(before));
        double feature_step = 0.0, network_step = 0.0;
        for (std::size_t i = 0; i < refs.size(); ++i) {
            const double s = (*old[i].value - *refs[i].value).cwiseAbs().maxCoeff();
            if (refs[i].group == kVertexGroup) {
                feature_step = s;
                CHECK(adam.learning_rate(i) == 5e-3);
            } else {
                network_step = std::max(network_step, s);
                CHECK(adam.learning_rate(i) == 1e-4);
            }
        }
        CHECK(feature_step == doctest::Approx(5e-3).epsilon(1e-6));
        CHECK(network_step == doctest::Approx(1e-4).epsilon(1e-5));
        CHECK(feature_step / network_step == doctest::Approx(50.0).epsilon(0.01));
        CHECK(adam.steps() == 1);
        CHECK(adam.first_moment(0)(0, 0) == doctest::Approx(0.03));
        CHECK(adam.second_moment(0)(0, 0) == doctest::Approx(0.00009));
    }
    SUBCASE("shape mismatch is rejected") { CHECK_THROWS(adam.step({})); }
}

TEST_CASE("trailing average") {
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    CHECK(trailing_average(v, 9) == 5.5);
    CHECK(trailing_average(v, 11) == 7.5);
    CHECK(trailing_average(v, 1) == 1.5);
    CHECK(trailing_average(v, 2, 2) == 2.5);
}

TEST_CASE("training is deterministic") {
    const VoxelWorld world = fixtures::training_world();
    const Config config = quick_config(3);
    std::vector<IterationMetrics> seen;
    TrainHooks hooks;
    hooks.on_iteration = [&](const IterationMetrics& m) { seen.push_back(m); };
    const TrainResult a = train(world, config, LabelScheme{}, hooks);
    const TrainResult b = train(world, config, LabelScheme{});
    REQUIRE(a.history.size() == 3);
    CHECK(seen.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(a.history[i].iteration == i + 1);
        CHECK(a.history[i].loss.total == b.history[i].loss.total);
        CHECK(std::isfinite(a.history[i].loss.total));
    }
    CHECK(a.model.features.values() == b.model.features.values());
    const std::string line = format_metrics(a.history[0]);
    CHECK(line.find("iteration=1 ") == 0);
    CHECK(line.find("loss=") != std::string::npos);
    CHECK(line.find("mean_t_end=") != std::string::npos);
}

TEST_CASE("non-finite parameters abort training") {
    const VoxelWorld world = fixtures::training_world();
    const Config config = quick_config(2);
    Model m = init_model(world, config.model, config.seed);
    m.params.at(kFieldGroup, "density.bias")(0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        train(world, config, LabelScheme{}, {}, std::move(m));
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        const std::string what = e.what();
        CHECK(what.find("iteration 1") != std::string::npos);
        CHECK(what.find("group field tensor density.bias") != std::string::npos);
    }
}
