#include "voxelfield/volume_renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "voxelfield/image_refiner.hpp"
#include "voxelfield/parallel.hpp"
#include "voxelfield/quadrature.hpp"

namespace voxelfield {

void CameraPose::validate() const {
    if (width < 1 || height < 1) throw std::invalid_argument("camera resolution must be positive");
    if (!(fov_y > 0.0 && fov_y < std::numbers::pi)) throw std::invalid_argument("camera fov must lie in (0, pi)");
    const Vec3 forward = look_at - eye;
    if (!(norm(forward) > 1e-12)) throw std::invalid_argument("camera eye and look_at coincide");
    if (!(norm(cross(forward, up)) > 1e-9 * norm(forward) * norm(up))) {
        throw std::invalid_argument("camera up vector is parallel to the view direction");
    }
}

Ray camera_ray(const CameraPose& camera, int px, int py) {
    const Vec3 forward = normalized(camera.look_at - camera.eye);
    const Vec3 right = normalized(cross(forward, camera.up));
    const Vec3 up = cross(right, forward);
    const double half = std::tan(0.5 * camera.fov_y);
    const double aspect = static_cast<double>(camera.width) / camera.height;
    const double sx = (2.0 * (px + 0.5) / camera.width - 1.0) * half * aspect;
    const double sy = (1.0 - 2.0 * (py + 0.5) / camera.height) * half;
    return make_ray(camera.eye, forward + right * sx + up * sy);
}

FrameGeometry frame_geometry(const VoxelWorld& world, const CameraPose& camera, const RenderSettings& settings) {
    camera.validate();
    if (settings.samples < 1) throw std::invalid_argument("samples per ray must be >= 1");
    const std::size_t n = camera.pixels();
    std::vector<SampleSet> per_ray(n);
    FrameGeometry g;
    g.width = camera.width;
    g.height = camera.height;
    g.rays.resize(n);
    g.truncated.assign(n, 0);

    parallel_for(static_cast<std::size_t>(camera.height), settings.threads, [&](std::size_t y) {
        for (int x = 0; x < camera.width; ++x) {
            const std::size_t pixel = y * static_cast<std::size_t>(camera.width) + static_cast<std::size_t>(x);
            const Ray ray = camera_ray(camera, x, static_cast<int>(y));
            const SegmentList segments = truncate(traverse(world, ray), settings.d_max);
            auto rng = pixel_rng(settings.frame_seed, pixel);
            g.rays[pixel] = ray;
            g.truncated[pixel] = segments.truncated ? 1 : 0;
            if (!segments.empty()) per_ray[pixel] = stratified_sample(ray, segments, settings.samples, rng);
        }
    });

    g.offsets.resize(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + per_ray[i].size();
    g.samples.reserve(g.offsets.back());
    for (auto& s : per_ray) g.samples.insert(g.samples.end(), s.begin(), s.end());
    return g;
}

RayIntegral integrate_ray(std::span<const double> sigma, std::span<const double> delta, std::span<const double> t_hat,
                          const Matrix& colors, std::span<const double> sky) {
    const std::size_t n = sigma.size();
    if (delta.size() != n || t_hat.size() != n || static_cast<std::size_t>(colors.rows()) != n ||
        static_cast<std::size_t>(colors.cols()) != sky.size()) {
        throw std::invalid_argument("integrate_ray: size mismatch");
    }
    std::vector<double> trans(n), weight(n);
    RayIntegral out;
    out.t_end = quadrature_weights(sigma, delta, trans, weight);
    out.color.assign(sky.begin(), sky.end());
    for (double& c : out.color) c *= out.t_end;
    double weighted_t = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < sky.size(); ++c) {
            out.color[c] += weight[i] * colors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        }
        weighted_t += weight[i] * t_hat[i];
        total += weight[i];
    }
    out.weight_sum = total + out.t_end;
    if (1.0 - out.t_end >= 1e-6) out.depth = weighted_t / (1.0 - out.t_end);
    return out;
}

Matrix clip_features(const Matrix& c, double lo, double hi) { return c.cwiseMax(lo).cwiseMin(hi); }

RenderVars render_rays(ad::Tape& t, const BoundModel& bound, const FrameGeometry& geometry, std::size_t ray_begin,
                       std::size_t ray_end, ad::Var w, const RenderSettings& settings) {
    if (ray_begin > ray_end || ray_end > geometry.ray_count()) throw std::out_of_range("render_rays: bad ray range");
    const FeatureTable& table = bound.model().features;
    const std::size_t s_begin = geometry.offsets[ray_begin];
    const std::size_t s_end = geometry.offsets[ray_end];
    const std::size_t n = s_end - s_begin;

    std::vector<std::array<std::uint32_t, 8>> corners(n);
    std::vector<std::array<double, 8>> weights(n);
    std::vector<LabelClass> labels(n);
    std::vector<double> deltas(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = geometry.samples[s_begin + i];
        const CornerStencil stencil = corner_stencil(table, s.voxel, s.position);
        corners[i] = stencil.index;
        weights[i] = stencil.weight;
        labels[i] = s.label.cls;
        deltas[i] = s.delta;
    }
    std::vector<std::size_t> offsets(ray_end - ray_begin + 1);
    for (std::size_t r = ray_begin; r <= ray_end; ++r) offsets[r - ray_begin] = geometry.offsets[r] - s_begin;

    Matrix directions(static_cast<Eigen::Index>(ray_end - ray_begin), 3);
    for (std::size_t r = ray_begin; r < ray_end; ++r) {
        const Vec3 d = geometry.rays[r].direction;
        directions.row(static_cast<Eigen::Index>(r - ray_begin)) << d.x, d.y, d.z;
    }

    const ad::Var codes = ad::trilinear(t, bound.features(), std::move(corners), std::move(weights));
    const FieldVars field = field_forward(t, bound, codes, labels, w);
    const ad::Var color = ad::clamp(t, field.color, settings.clip_lo, settings.clip_hi);
    const ad::Var sky = sky_forward(t, bound, t.constant(std::move(directions)), w);
    const ad::Var comp = ad::composite(t, field.density, color, sky, std::move(deltas), std::move(offsets));
    const Eigen::Index cd = t.value(color).cols();
    return RenderVars{comp, ad::slice_cols(t, comp, 0, cd), ad::slice_cols(t, comp, cd, 1), field.density};
}

FrameBuffers allocate_buffers(const FrameGeometry& geometry, int color_dim) {
    const std::size_t n = geometry.ray_count();
    FrameBuffers f;
    f.width = geometry.width;
    f.height = geometry.height;
    f.feature = Matrix::Zero(static_cast<Eigen::Index>(n), color_dim);
    f.rgb = Matrix::Zero(static_cast<Eigen::Index>(n), 3);
    f.depth.assign(n, kNoDepth);
    f.seg.assign(n, LabelClass::Sky);
    f.t_out.assign(n, 1.0);
    f.truncated = geometry.truncated;
    f.weight_sum.assign(n, 1.0);
    return f;
}

void fill_buffers(FrameBuffers& frames, const FrameGeometry& geometry, std::size_t ray_begin, const Matrix& composite,
                  const Matrix& density) {
    const Eigen::Index cd = composite.cols() - 1;
    const std::size_t s_base = geometry.offsets[ray_begin];
    std::vector<double> sigma, delta, trans, weight;
    for (Eigen::Index r = 0; r < composite.rows(); ++r) {
        const std::size_t ray = ray_begin + static_cast<std::size_t>(r);
        const std::size_t b = geometry.offsets[ray], e = geometry.offsets[ray + 1];
        const std::size_t n = e - b;
        sigma.resize(n);
        delta.resize(n);
        trans.resize(n);
        weight.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            sigma[i] = density(static_cast<Eigen::Index>(b - s_base + i), 0);
            delta[i] = geometry.samples[b + i].delta;
        }
        const double t_end = quadrature_weights(sigma, delta, trans, weight);

        double total = 0.0, weighted_t = 0.0, best = t_end;
        LabelClass seg = LabelClass::Sky;
        for (std::size_t i = 0; i < n; ++i) {
            total += weight[i];
            weighted_t += weight[i] * geometry.samples[b + i].t;
            if (weight[i] > best) {
                best = weight[i];
                seg = geometry.samples[b + i].label.cls;
            }
        }
        frames.feature.row(static_cast<Eigen::Index>(ray)) = composite.row(r).head(cd);
        frames.t_out[ray] = composite(r, cd);
        frames.seg[ray] = seg;
        frames.weight_sum[ray] = total + t_end;
        frames.depth[ray] = 1.0 - t_end >= 1e-6 ? weighted_t / (1.0 - t_end) : kNoDepth;
    }
}

FrameBuffers render_frame(const VoxelWorld& world, const Model& model, const CameraPose& camera, const StyleCode& z,
                          const RenderSettings& settings) {
    const FrameGeometry geometry = frame_geometry(world, camera, settings);
    const StyleFeature w = style_network(model, z);
    FrameBuffers frames = allocate_buffers(geometry, model.config.color_dim);

    const std::size_t chunk = std::max<std::size_t>(settings.chunk_rays, 1);
    const std::size_t n_chunks = (geometry.ray_count() + chunk - 1) / chunk;
    parallel_for(n_chunks, settings.threads, [&](std::size_t c) {
        const std::size_t begin = c * chunk;
        const std::size_t end = std::min(begin + chunk, geometry.ray_count());
        ad::Tape tape;
        const BoundModel bound(tape, model, false);
        const RenderVars vars = render_rays(tape, bound, geometry, begin, end, tape.constant(w), settings);
        fill_buffers(frames, geometry, begin, tape.value(vars.composite), tape.value(vars.density));
    });

    frames.rgb = settings.use_refiner ? refine(model, frames.feature, frames.width, frames.height, w)
                                      : refine_bypass(frames.feature);
    return frames;
}

LabelProjection project_labels(const VoxelWorld& world, const CameraPose& camera) {
    camera.validate();
    LabelProjection out;
    out.seg.assign(camera.pixels(), LabelClass::Sky);
    out.depth.assign(camera.pixels(), kNoDepth);
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const SegmentList segments = traverse(world, camera_ray(camera, x, y));
            if (segments.empty()) continue;
            const std::size_t pixel = static_cast<std::size_t>(y) * camera.width + x;
            out.seg[pixel] = segments.segments.front().label.cls;
            out.depth[pixel] = segments.segments.front().t_enter;
        }
    }
    return out;
}

double opacity_regularizer(const FrameBuffers& frames) {
    double sum = 0.0;
    for (std::size_t i = 0; i < frames.t_out.size(); ++i) {
        if (frames.truncated[i]) sum += frames.t_out[i];
    }
    return sum;
}

} // namespace voxelfield
