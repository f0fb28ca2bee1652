#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "voxelfield/model.hpp"
#include "voxelfield/vec3.hpp"

namespace voxelfield {

struct LossWeights {
    double l2 = 10.0;
    double l1 = 1.0;
    double opacity = 0.5;
    // Adversarial, perceptual and KL terms are not implemented; they must stay 0.
    double gan = 0.0;
    double perceptual = 0.0;
    double kl = 0.0;
};

/// Flat-shaded first-hit renderer that produces training targets.
struct OracleTarget {
    Vec3 light{-0.4, 0.8, -0.45}; // direction towards the light, normalized on use
    double ambient = 0.45;
    double diffuse = 0.55;
    Vec3 sky_horizon{0.78, 0.86, 0.95};
    Vec3 sky_zenith{0.32, 0.52, 0.86};
};

struct CameraSampling {
    double height_min = 1.5; // above the top face of the highest voxel in the column
    double height_max = 3.0;
    double min_mean_depth = 2.0;
    double min_entropy = 0.75; // nats
    int retries = 100;
    double fov_y = 1.0471975511965976; // 60 degrees
};

struct Config {
    ModelConfig model;

    int train_samples = 24;
    int eval_samples = 32;
    double d_max = 3.0;
    double clip_lo = -1.0;
    double clip_hi = 1.0;
    int shell_thickness = 4;

    LossWeights loss;
    double lr_network = 1e-4;
    double lr_features = 5e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    CameraSampling camera;
    OracleTarget oracle;

    int train_width = 32;
    int train_height = 32;
    int iterations = 2000;
    int checkpoint_every = 500; // 0 disables periodic checkpoints
    std::uint64_t seed = 1;
    int threads = 1;
    bool use_refiner = true;

    /// Throws std::invalid_argument naming the offending key.
    void validate() const;
};

/// `key=value` text; keys are the names written by format_config. Unknown keys are errors.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);
std::string format_config(const Config& config);

} // namespace voxelfield
