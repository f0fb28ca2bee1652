#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "voxelfield/autodiff.hpp"
#include "voxelfield/config.hpp"
#include "voxelfield/labels.hpp"
#include "voxelfield/model.hpp"
#include "voxelfield/volume_renderer.hpp"

namespace voxelfield {

/// Target image (pixels x 3, values in [0, 1]): first-hit albedo shaded by
/// ambient + diffuse * max(0, n . l), sky pixels a horizon-to-zenith blend by ray elevation.
Matrix oracle_render(const VoxelWorld& world, const CameraPose& camera, const OracleTarget& oracle,
                     const LabelScheme& scheme);

class CameraSamplingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CameraCheck {
    bool accepted = false;
    double mean_depth = 0.0; // over pixels that hit a voxel; 0 when none do
    double entropy = 0.0;
};
CameraCheck check_camera(const LabelProjection& projection, const CameraSampling& sampling);

/// Eye and target drawn above random columns, retried until the projected labels pass the depth
/// and entropy tests. `attempts`, when given, receives the number of poses tried.
CameraPose sample_camera(const VoxelWorld& world, std::mt19937_64& rng, const CameraSampling& sampling, int width,
                         int height, int* attempts = nullptr);

/// Loss terms. `opacity` is the regularizer divided by the ray count, so
/// total = l2 * w.l2 + l1 * w.l1 + opacity * w.opacity.
struct LossParts {
    double total = 0.0;
    double l2 = 0.0; // mean squared error
    double l1 = 0.0; // mean absolute error
    double opacity = 0.0;
};

LossParts compute_loss(const Matrix& pred, const Matrix& target, const FrameBuffers& frames,
                       const LossWeights& weights);

struct LossVars {
    ad::Var total, l2, l1, opacity;
};
LossVars loss_on_tape(ad::Tape& t, ad::Var pred, const Matrix& target, ad::Var t_end,
                      const std::vector<std::uint8_t>& truncated, const LossWeights& weights);

LossParts loss_values(const ad::Tape& t, const LossVars& vars);

/// Adam with one learning rate per parameter group.
class Adam {
public:
    Adam(Model& model, double lr_network, double lr_features, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    /// `grads` in parameter_refs() order.
    void step(const std::vector<Matrix>& grads);

    int steps() const { return steps_; }
    double learning_rate(std::size_t ref) const { return lr_[ref]; }
    const Matrix& first_moment(std::size_t ref) const { return m_[ref]; }
    const Matrix& second_moment(std::size_t ref) const { return v_[ref]; }

private:
    std::vector<ParameterRef> refs_;
    std::vector<double> lr_;
    std::vector<Matrix> m_, v_;
    double beta1_, beta2_, eps_;
    int steps_ = 0;
};

/// One differentiable forward/backward pass for a fixed camera, style code and target.
struct StepResult {
    LossParts loss;
    FrameBuffers frames;
    std::vector<Matrix> grads; // parameter_refs() order
};
StepResult forward_backward(const VoxelWorld& world, const Model& model, const CameraPose& camera, const StyleCode& z,
                            const Matrix& target, const Config& config, std::uint64_t frame_seed);

/// Loss only, with the branch signature of every non-smooth op evaluated.
struct LossProbe {
    LossParts loss;
    std::uint64_t branch_signature = 0;
};
LossProbe evaluate_loss(const VoxelWorld& world, const Model& model, const CameraPose& camera, const StyleCode& z,
                        const Matrix& target, const Config& config, std::uint64_t frame_seed);

struct IterationMetrics {
    int iteration = 0;
    LossParts loss;
    double mean_t_end_truncated = 0.0; // 0 when no ray was truncated
    int truncated_rays = 0;
    int camera_attempts = 0;
    double seconds = 0.0;
};

/// One line of `key=value` fields.
std::string format_metrics(const IterationMetrics& m);

/// Mean of `values[end - window + 1 .. end]` (clamped at the front), 0-based `end`.
double trailing_average(const std::vector<double>& values, std::size_t end, std::size_t window = 10);

class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainHooks {
    std::function<void(const IterationMetrics&)> on_iteration;
    std::filesystem::path checkpoint_dir; // empty: no checkpoints
};

struct TrainResult {
    Model model;
    std::vector<IterationMetrics> history;
};

/// Fits `model` (or a fresh one from config.seed) to oracle targets of `world`.
TrainResult train(const VoxelWorld& world, const Config& config, const LabelScheme& scheme, const TrainHooks& hooks = {},
                  std::optional<Model> initial = std::nullopt);

} // namespace voxelfield
