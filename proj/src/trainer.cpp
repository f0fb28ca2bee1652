#include "voxelfield/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "voxelfield/image_refiner.hpp"
#include "voxelfield/parallel.hpp"

namespace voxelfield {

// ---- oracle target ---------------------------------------------------------------------------

Matrix oracle_render(const VoxelWorld& world, const CameraPose& camera, const OracleTarget& oracle,
                     const LabelScheme& scheme) {
    camera.validate();
    const Vec3 light = normalized(oracle.light);
    Matrix image(static_cast<Eigen::Index>(camera.pixels()), 3);
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const Eigen::Index pixel = static_cast<Eigen::Index>(y) * camera.width + x;
            const Ray ray = camera_ray(camera, x, y);
            const SegmentList segments = traverse(world, ray);
            Vec3 color;
            if (segments.empty()) {
                const double f = std::clamp(ray.direction.y, 0.0, 1.0);
                color = oracle.sky_horizon * (1.0 - f) + oracle.sky_zenith * f;
            } else {
                const Segment& hit = segments.segments.front();
                Vec3 n = -ray.direction;
                if (hit.entry_axis >= 0) {
                    n = Vec3{};
                    n[hit.entry_axis] = ray.direction[hit.entry_axis] > 0.0 ? -1.0 : 1.0;
                }
                const double shade = oracle.ambient + oracle.diffuse * std::max(0.0, dot(n, light));
                const Rgb& albedo = scheme.albedo(hit.label.cls);
                color = Vec3{albedo.r, albedo.g, albedo.b} * shade;
            }
            image(pixel, 0) = std::clamp(color.x, 0.0, 1.0);
            image(pixel, 1) = std::clamp(color.y, 0.0, 1.0);
            image(pixel, 2) = std::clamp(color.z, 0.0, 1.0);
        }
    }
    return image;
}

// ---- camera sampling -------------------------------------------------------------------------

CameraCheck check_camera(const LabelProjection& projection, const CameraSampling& sampling) {
    CameraCheck check;
    double depth_sum = 0.0;
    std::size_t hits = 0;
    for (double d : projection.depth) {
        if (d == kNoDepth) continue;
        depth_sum += d;
        ++hits;
    }
    check.mean_depth = hits ? depth_sum / static_cast<double>(hits) : 0.0;
    check.entropy = label_entropy(projection.seg);
    check.accepted = check.mean_depth >= sampling.min_mean_depth && check.entropy >= sampling.min_entropy;
    return check;
}

namespace {

Vec3 point_above_ground(const VoxelWorld& world, std::mt19937_64& rng, const CameraSampling& sampling) {
    const auto dims = world.dims();
    const double x = uniform01(rng) * dims[0];
    const double z = uniform01(rng) * dims[2];
    const int top = world.column_top(static_cast<int>(x), static_cast<int>(z));
    const double lift = sampling.height_min + uniform01(rng) * (sampling.height_max - sampling.height_min);
    return Vec3{x, top + 1.0 + lift, z};
}

} // namespace

CameraPose sample_camera(const VoxelWorld& world, std::mt19937_64& rng, const CameraSampling& sampling, int width,
                         int height, int* attempts) {
    if (world.empty()) throw CameraSamplingError("cannot place a camera in an empty world");
    for (int attempt = 1; attempt <= sampling.retries; ++attempt) {
        if (attempts) *attempts = attempt;
        CameraPose pose;
        pose.eye = point_above_ground(world, rng, sampling);
        pose.look_at = point_above_ground(world, rng, sampling);
        pose.fov_y = sampling.fov_y;
        pose.width = width;
        pose.height = height;
        const Vec3 view = pose.look_at - pose.eye;
        // Nearly vertical views leave the up vector undefined.
        if (norm(view) < 1e-3 || std::abs(view.y) > 0.999 * norm(view)) continue;
        if (check_camera(project_labels(world, pose), sampling).accepted) return pose;
    }
    throw CameraSamplingError("no camera passed the depth and entropy tests after " +
                              std::to_string(sampling.retries) + " attempts");
}

// ---- loss ------------------------------------------------------------------------------------

LossParts compute_loss(const Matrix& pred, const Matrix& target, const FrameBuffers& frames,
                       const LossWeights& weights) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw std::invalid_argument("compute_loss: prediction and target shapes differ");
    }
    LossParts p;
    const Matrix diff = pred - target;
    const double n = static_cast<double>(diff.size());
    if (n > 0) {
        p.l2 = diff.squaredNorm() / n;
        p.l1 = diff.cwiseAbs().sum() / n;
    }
    const std::size_t rays = frames.pixels();
    p.opacity = rays ? opacity_regularizer(frames) / static_cast<double>(rays) : 0.0;
    p.total = weights.l2 * p.l2 + weights.l1 * p.l1 + weights.opacity * p.opacity;
    return p;
}

LossVars loss_on_tape(ad::Tape& t, ad::Var pred, const Matrix& target, ad::Var t_end,
                      const std::vector<std::uint8_t>& truncated, const LossWeights& weights) {
    const Matrix& tv = t.value(t_end);
    if (static_cast<std::size_t>(tv.rows()) != truncated.size()) {
        throw std::invalid_argument("loss_on_tape: one truncation flag per ray required");
    }
    const ad::Var diff = ad::sub(t, pred, t.constant(target));
    const ad::Var l2 = ad::mean(t, ad::square(t, diff));
    const ad::Var l1 = ad::mean(t, ad::abs(t, diff));

    Matrix mask(tv.rows(), 1);
    for (std::size_t i = 0; i < truncated.size(); ++i) mask(static_cast<Eigen::Index>(i), 0) = truncated[i] ? 1.0 : 0.0;
    const double rays = static_cast<double>(std::max<std::size_t>(truncated.size(), 1));
    const ad::Var opacity = ad::affine(t, ad::sum(t, ad::mul(t, t_end, t.constant(std::move(mask)))), 1.0 / rays);

    ad::Var total = ad::add(t, ad::affine(t, l2, weights.l2), ad::affine(t, l1, weights.l1));
    total = ad::add(t, total, ad::affine(t, opacity, weights.opacity));
    return LossVars{total, l2, l1, opacity};
}

LossParts loss_values(const ad::Tape& t, const LossVars& v) {
    return LossParts{t.value(v.total)(0, 0), t.value(v.l2)(0, 0), t.value(v.l1)(0, 0), t.value(v.opacity)(0, 0)};
}

// ---- Adam ------------------------------------------------------------------------------------

Adam::Adam(Model& model, double lr_network, double lr_features, double beta1, double beta2, double eps)
    : refs_(parameter_refs(model)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& r : refs_) {
        lr_.push_back(r.group == kVertexGroup ? lr_features : lr_network);
        m_.push_back(Matrix::Zero(r.value->rows(), r.value->cols()));
        v_.push_back(Matrix::Zero(r.value->rows(), r.value->cols()));
    }
}

void Adam::step(const std::vector<Matrix>& grads) {
    if (grads.size() != refs_.size()) throw std::invalid_argument("Adam::step: one gradient per parameter required");
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, steps_);
    const double c2 = 1.0 - std::pow(beta2_, steps_);
    for (std::size_t i = 0; i < refs_.size(); ++i) {
        const Matrix& g = grads[i];
        Matrix& p = *refs_[i].value;
        if (g.rows() != p.rows() || g.cols() != p.cols()) throw std::invalid_argument("Adam::step: gradient shape mismatch");
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseAbs2();
        p.array() -= lr_[i] * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
}

// ---- one step --------------------------------------------------------------------------------

namespace {

RenderSettings train_settings(const Config& config, std::uint64_t frame_seed) {
    RenderSettings s;
    s.samples = config.train_samples;
    s.d_max = config.d_max;
    s.clip_lo = config.clip_lo;
    s.clip_hi = config.clip_hi;
    s.frame_seed = frame_seed;
    s.threads = resolve_threads(config.threads);
    s.use_refiner = config.use_refiner;
    return s;
}

struct ForwardPass {
    FrameGeometry geometry;
    RenderVars render;
    ad::Var rgb;
    LossVars loss;
};

ForwardPass forward(ad::Tape& tape, const BoundModel& bound, const VoxelWorld& world, const CameraPose& camera,
                    const StyleCode& z, const Matrix& target, const Config& config, std::uint64_t frame_seed) {
    const RenderSettings settings = train_settings(config, frame_seed);
    ForwardPass f;
    f.geometry = frame_geometry(world, camera, settings);
    const ad::Var w = style_forward(tape, bound, tape.constant(z));
    f.render = render_rays(tape, bound, f.geometry, 0, f.geometry.ray_count(), w, settings);
    f.rgb = settings.use_refiner ? refine_forward(tape, bound, f.render.feature, camera.width, camera.height, w)
                                 : refine_bypass(tape, f.render.feature);
    f.loss = loss_on_tape(tape, f.rgb, target, f.render.t_end, f.geometry.truncated, config.loss);
    return f;
}

} // namespace

StepResult forward_backward(const VoxelWorld& world, const Model& model, const CameraPose& camera, const StyleCode& z,
                            const Matrix& target, const Config& config, std::uint64_t frame_seed) {
    ad::Tape tape;
    const BoundModel bound(tape, model, true);
    const ForwardPass f = forward(tape, bound, world, camera, z, target, config, frame_seed);
    tape.backward(f.loss.total);

    StepResult out;
    out.loss = loss_values(tape, f.loss);
    out.grads = bound.gradients(tape);
    out.frames = allocate_buffers(f.geometry, model.config.color_dim);
    fill_buffers(out.frames, f.geometry, 0, tape.value(f.render.composite), tape.value(f.render.density));
    out.frames.rgb = tape.value(f.rgb);
    return out;
}

LossProbe evaluate_loss(const VoxelWorld& world, const Model& model, const CameraPose& camera, const StyleCode& z,
                        const Matrix& target, const Config& config, std::uint64_t frame_seed) {
    ad::Tape tape;
    const BoundModel bound(tape, model, false);
    const ForwardPass f = forward(tape, bound, world, camera, z, target, config, frame_seed);
    return LossProbe{loss_values(tape, f.loss), tape.branch_signature()};
}

// ---- training loop ---------------------------------------------------------------------------

std::string format_metrics(const IterationMetrics& m) {
    std::ostringstream out;
    out.precision(9);
    out << "iteration=" << m.iteration << " loss=" << m.loss.total << " l2=" << m.loss.l2 << " l1=" << m.loss.l1
        << " opacity=" << m.loss.opacity << " mean_t_end=" << m.mean_t_end_truncated
        << " truncated_rays=" << m.truncated_rays << " camera_attempts=" << m.camera_attempts
        << " seconds=" << m.seconds;
    return out.str();
}

double trailing_average(const std::vector<double>& values, std::size_t end, std::size_t window) {
    if (values.empty() || window == 0) return 0.0;
    end = std::min(end, values.size() - 1);
    const std::size_t begin = end + 1 >= window ? end + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t i = begin; i <= end; ++i) sum += values[i];
    return sum / static_cast<double>(end + 1 - begin);
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed ^ (salt * 0x9E3779B97F4A7C15ull);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::string non_finite_report(int iteration, Model& model, const std::vector<Matrix>& grads,
                              const LossParts& loss) {
    std::ostringstream out;
    out << "non-finite loss at iteration " << iteration << " (total=" << loss.total << " l2=" << loss.l2
        << " l1=" << loss.l1 << " opacity=" << loss.opacity << ")";
    const auto refs = parameter_refs(model);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const bool bad_value = !refs[i].value->allFinite();
        const bool bad_grad = i < grads.size() && !grads[i].allFinite();
        if (bad_value || bad_grad) {
            out << "; group " << refs[i].group << " tensor " << refs[i].name
                << (bad_value ? " has non-finite values" : " has non-finite gradients");
        }
    }
    return out.str();
}

} // namespace

TrainResult train(const VoxelWorld& world, const Config& config, const LabelScheme& scheme, const TrainHooks& hooks,
                  std::optional<Model> initial) {
    config.validate();
    TrainResult result;
    result.model = initial ? std::move(*initial) : init_model(world, config.model, config.seed);
    Model& model = result.model;
    Adam adam(model, config.lr_network, config.lr_features, config.adam_beta1, config.adam_beta2, config.adam_eps);
    std::mt19937_64 rng(mix_seed(config.seed, 0x7261696eull));
    if (!hooks.checkpoint_dir.empty()) std::filesystem::create_directories(hooks.checkpoint_dir);

    for (int it = 1; it <= config.iterations; ++it) {
        const auto start = std::chrono::steady_clock::now();
        IterationMetrics metrics;
        metrics.iteration = it;
        const CameraPose camera =
            sample_camera(world, rng, config.camera, config.train_width, config.train_height, &metrics.camera_attempts);
        const StyleCode z = sample_style_code(config.model.style_dim, rng());
        const Matrix target = oracle_render(world, camera, config.oracle, scheme);
        StepResult step = forward_backward(world, model, camera, z, target, config, mix_seed(config.seed, it));

        if (!std::isfinite(step.loss.total)) throw NonFiniteError(non_finite_report(it, model, step.grads, step.loss));
        for (const Matrix& g : step.grads) {
            if (!g.allFinite()) throw NonFiniteError(non_finite_report(it, model, step.grads, step.loss));
        }
        adam.step(step.grads);

        metrics.loss = step.loss;
        double t_sum = 0.0;
        for (std::size_t i = 0; i < step.frames.pixels(); ++i) {
            if (!step.frames.truncated[i]) continue;
            t_sum += step.frames.t_out[i];
            ++metrics.truncated_rays;
        }
        metrics.mean_t_end_truncated = metrics.truncated_rays ? t_sum / metrics.truncated_rays : 0.0;
        metrics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.history.push_back(metrics);
        if (hooks.on_iteration) hooks.on_iteration(metrics);

        const bool periodic = config.checkpoint_every > 0 && it % config.checkpoint_every == 0;
        if (!hooks.checkpoint_dir.empty() && (periodic || it == config.iterations)) {
            save_checkpoint(hooks.checkpoint_dir / ("checkpoint_" + std::to_string(it) + ".vfck"), model);
            save_checkpoint(hooks.checkpoint_dir / "latest.vfck", model);
        }
    }
    return result;
}

} // namespace voxelfield
