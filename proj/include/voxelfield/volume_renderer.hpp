#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "voxelfield/autodiff.hpp"
#include "voxelfield/model.hpp"
#include "voxelfield/neural_field.hpp"
#include "voxelfield/traversal.hpp"
#include "voxelfield/voxel_world.hpp"

namespace voxelfield {

/// Pinhole camera. Pixel (0, 0) is the top-left corner of the image.
struct CameraPose {
    Vec3 eye;
    Vec3 look_at{0.0, 0.0, 1.0};
    Vec3 up{0.0, 1.0, 0.0};
    double fov_y = 1.0; // vertical field of view, radians
    int width = 32;
    int height = 32;

    /// Throws std::invalid_argument on a degenerate pose.
    void validate() const;
    std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

/// Ray through the center of pixel (px, py).
Ray camera_ray(const CameraPose& camera, int px, int py);

inline constexpr double kNoDepth = -1.0;

struct RenderSettings {
    int samples = 24;
    double d_max = 3.0;
    double clip_lo = -1.0;
    double clip_hi = 1.0;
    std::uint64_t frame_seed = 0;
    int threads = 1;
    bool use_refiner = true;
    std::size_t chunk_rays = 1024; // rays per tape when rendering without gradients
};

/// Per-pixel rays, truncated in-voxel intervals and stratified samples for one frame.
struct FrameGeometry {
    int width = 0;
    int height = 0;
    std::vector<Ray> rays;
    std::vector<std::uint8_t> truncated;
    std::vector<Sample> samples;      // all rays' samples back to back
    std::vector<std::size_t> offsets; // rays + 1 entries into `samples`

    std::size_t ray_count() const { return rays.size(); }
};

/// Deterministic for a given frame seed and independent of the thread count.
FrameGeometry frame_geometry(const VoxelWorld& world, const CameraPose& camera, const RenderSettings& settings);

struct FrameBuffers {
    int width = 0;
    int height = 0;
    Matrix feature;                  // pixels x color_dim, row y * width + x
    Matrix rgb;                      // pixels x 3
    std::vector<double> depth;       // kNoDepth where the ray is (almost) transparent
    std::vector<LabelClass> seg;     // class of the heaviest sample, Sky when the sky term wins
    std::vector<double> t_out;       // residual transmittance
    std::vector<std::uint8_t> truncated;
    std::vector<double> weight_sum;  // sum of sample weights plus residual transmittance

    std::size_t pixels() const { return t_out.size(); }
};

struct RayIntegral {
    std::vector<double> color;
    double t_end = 1.0;
    double depth = kNoDepth;
    double weight_sum = 1.0;
};

/// Quadrature of one ray: `colors` is N x C (already clipped), `sky` has C entries.
RayIntegral integrate_ray(std::span<const double> sigma, std::span<const double> delta, std::span<const double> t_hat,
                          const Matrix& colors, std::span<const double> sky);

Matrix clip_features(const Matrix& c, double lo = -1.0, double hi = 1.0);

/// Tape nodes of a rendered batch of rays.
struct RenderVars {
    ad::Var composite; // rays x (C + 1): feature then residual transmittance
    ad::Var feature;   // rays x C
    ad::Var t_end;     // rays x 1
    ad::Var density;   // samples x 1
};

/// Renders rays [ray_begin, ray_end) of `geometry` on `t`.
RenderVars render_rays(ad::Tape& t, const BoundModel& bound, const FrameGeometry& geometry, std::size_t ray_begin,
                       std::size_t ray_end, ad::Var w, const RenderSettings& settings);

/// Writes feature, depth, seg, t_out and weight_sum for rays [ray_begin, ray_begin + rows).
void fill_buffers(FrameBuffers& frames, const FrameGeometry& geometry, std::size_t ray_begin, const Matrix& composite,
                  const Matrix& density);

FrameBuffers allocate_buffers(const FrameGeometry& geometry, int color_dim);

/// Full forward pass without gradients: geometry, field, quadrature, then the refiner (or the
/// bypass when settings.use_refiner is false).
FrameBuffers render_frame(const VoxelWorld& world, const Model& model, const CameraPose& camera, const StyleCode& z,
                          const RenderSettings& settings);

struct LabelProjection {
    std::vector<LabelClass> seg; // Sky where the ray hits nothing
    std::vector<double> depth;   // t of the first hit, kNoDepth on a miss
};

/// First-hit labels ignoring densities.
LabelProjection project_labels(const VoxelWorld& world, const CameraPose& camera);

/// Sum of residual transmittance over truncated rays.
double opacity_regularizer(const FrameBuffers& frames);

} // namespace voxelfield
