#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "voxelfield/autodiff.hpp"
#include "voxelfield/tensor.hpp"
#include "voxelfield/voxel_world.hpp"

namespace voxelfield {

// Parameter group names. Optimizer learning rates are assigned per group.
inline constexpr std::string_view kVertexGroup = "vertex_features";
inline constexpr std::string_view kStyleGroup = "style";
inline constexpr std::string_view kFieldGroup = "field";
inline constexpr std::string_view kSkyGroup = "sky";
inline constexpr std::string_view kRefinerGroup = "refiner";

struct ModelConfig {
    int feature_dim = 64;      // per-vertex feature width
    int encoded_channels = 24; // leading feature channels that get Fourier-encoded
    int n_freq = 4;            // Fourier octaves for the location code
    int sky_freq = 4;          // Fourier octaves for the sky direction
    int hidden = 32;
    int color_dim = 8;
    int style_dim = 16;
    int style_feature_dim = 32;
    int label_dim = 8;
    int trunk_layers = 2;   // style-free layers feeding the density head
    int feature_layers = 2; // style-modulated layers producing the feature
    int refiner_width = 16;
    int refiner_layers = 4; // 3x3 convolutions; receptive field is 2 * layers + 1
    double leaky_slope = 0.2;
    double demod_eps = 1e-8;
    double feature_init_scale = 0.1;

    int encoded_width() const { return 2 * encoded_channels * n_freq + (feature_dim - encoded_channels); }
    int field_input_width() const { return encoded_width() + label_dim; }
    int sky_input_width() const { return 3 + 2 * 3 * sky_freq; }
    int refiner_receptive_field() const { return 2 * refiner_layers + 1; }

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct NamedParameter {
    std::string group;
    std::string name;
    Matrix value;
};

/// Network parameters addressable by (group, name), kept in insertion order.
class ParameterStore {
public:
    Matrix& add(std::string_view group, std::string_view name, Matrix value);
    Matrix& at(std::string_view group, std::string_view name);
    const Matrix& at(std::string_view group, std::string_view name) const;
    std::size_t index_of(std::string_view group, std::string_view name) const;

    std::vector<NamedParameter>& entries() { return entries_; }
    const std::vector<NamedParameter>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<NamedParameter> entries_;
};

/// Everything trainable: vertex features plus the style, field, sky and refiner networks.
struct Model {
    ModelConfig config;
    FeatureTable features;
    ParameterStore params;
};

Model init_model(const VoxelWorld& world, const ModelConfig& config, std::uint64_t seed);

/// A mutable view of one trainable tensor, vertex features first.
struct ParameterRef {
    std::string_view group;
    std::string_view name;
    Matrix* value;
};
std::vector<ParameterRef> parameter_refs(Model& model);
std::vector<std::string> group_names(const Model& model);

/// Leaves for every trainable tensor on one tape.
class BoundModel {
public:
    /// With `differentiable` false the parameters enter as constants.
    BoundModel(ad::Tape& tape, const Model& model, bool differentiable = true);

    ad::Var features() const { return features_; }
    ad::Var operator()(std::string_view group, std::string_view name) const;
    const Model& model() const { return *model_; }
    const ModelConfig& config() const { return model_->config; }

    /// Gradients in parameter_refs() order; zero where nothing flowed.
    std::vector<Matrix> gradients(const ad::Tape& tape) const;

private:
    const Model* model_;
    ad::Var features_;
    std::vector<ad::Var> vars_;
};

// Checkpoint: "VFCKPT01", u32 version, u32 config length + config text, u64 vertex count +
// vertex keys as 3 x i32, u32 tensor count, then per tensor u32 group length + group,
// u32 name length + name, u64 rows, u64 cols, rows * cols little-endian f64. The vertex
// feature table is stored as tensor ("vertex_features", "features").
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

std::string format_model_config(const ModelConfig& config);
ModelConfig parse_model_config(std::string_view text);

} // namespace voxelfield
