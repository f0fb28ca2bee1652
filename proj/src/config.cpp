#include "voxelfield/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <variant>
#include <vector>

#include "voxelfield/keyvalue.hpp"

namespace voxelfield {

namespace {

using FieldPtr = std::variant<int*, double*, std::uint64_t*, bool*>;

struct Field {
    const char* key;
    FieldPtr ptr;
};

std::vector<Field> fields(Config& c) {
    ModelConfig& m = c.model;
    return {
        {"model.feature_dim", &m.feature_dim},
        {"model.encoded_channels", &m.encoded_channels},
        {"model.n_freq", &m.n_freq},
        {"model.sky_freq", &m.sky_freq},
        {"model.hidden", &m.hidden},
        {"model.color_dim", &m.color_dim},
        {"model.style_dim", &m.style_dim},
        {"model.style_feature_dim", &m.style_feature_dim},
        {"model.label_dim", &m.label_dim},
        {"model.trunk_layers", &m.trunk_layers},
        {"model.feature_layers", &m.feature_layers},
        {"model.refiner_width", &m.refiner_width},
        {"model.refiner_layers", &m.refiner_layers},
        {"model.leaky_slope", &m.leaky_slope},
        {"model.demod_eps", &m.demod_eps},
        {"model.feature_init_scale", &m.feature_init_scale},
        {"train_samples", &c.train_samples},
        {"eval_samples", &c.eval_samples},
        {"d_max", &c.d_max},
        {"clip_lo", &c.clip_lo},
        {"clip_hi", &c.clip_hi},
        {"shell_thickness", &c.shell_thickness},
        {"loss.l2", &c.loss.l2},
        {"loss.l1", &c.loss.l1},
        {"loss.opacity", &c.loss.opacity},
        {"loss.gan", &c.loss.gan},
        {"loss.perceptual", &c.loss.perceptual},
        {"loss.kl", &c.loss.kl},
        {"lr_network", &c.lr_network},
        {"lr_features", &c.lr_features},
        {"adam_beta1", &c.adam_beta1},
        {"adam_beta2", &c.adam_beta2},
        {"adam_eps", &c.adam_eps},
        {"camera.height_min", &c.camera.height_min},
        {"camera.height_max", &c.camera.height_max},
        {"camera.min_mean_depth", &c.camera.min_mean_depth},
        {"camera.min_entropy", &c.camera.min_entropy},
        {"camera.retries", &c.camera.retries},
        {"camera.fov_y", &c.camera.fov_y},
        {"oracle.light_x", &c.oracle.light.x},
        {"oracle.light_y", &c.oracle.light.y},
        {"oracle.light_z", &c.oracle.light.z},
        {"oracle.ambient", &c.oracle.ambient},
        {"oracle.diffuse", &c.oracle.diffuse},
        {"oracle.sky_horizon_r", &c.oracle.sky_horizon.x},
        {"oracle.sky_horizon_g", &c.oracle.sky_horizon.y},
        {"oracle.sky_horizon_b", &c.oracle.sky_horizon.z},
        {"oracle.sky_zenith_r", &c.oracle.sky_zenith.x},
        {"oracle.sky_zenith_g", &c.oracle.sky_zenith.y},
        {"oracle.sky_zenith_b", &c.oracle.sky_zenith.z},
        {"train_width", &c.train_width},
        {"train_height", &c.train_height},
        {"iterations", &c.iterations},
        {"checkpoint_every", &c.checkpoint_every},
        {"seed", &c.seed},
        {"threads", &c.threads},
        {"use_refiner", &c.use_refiner},
    };
}

void fail(const std::string& key, const std::string& why) { throw std::invalid_argument(key + ": " + why); }

void require(bool ok, const char* key, const char* why) {
    if (!ok) fail(key, why);
}

} // namespace

void Config::validate() const {
    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        fail("model", e.what());
    }
    require(train_samples >= 1, "train_samples", "must be >= 1");
    require(eval_samples >= 1, "eval_samples", "must be >= 1");
    require(d_max > 0.0 && std::isfinite(d_max), "d_max", "must be positive");
    require(clip_lo < clip_hi, "clip_lo", "must be below clip_hi");
    require(shell_thickness >= 1, "shell_thickness", "must be >= 1");
    require(loss.l2 >= 0.0, "loss.l2", "must be >= 0");
    require(loss.l1 >= 0.0, "loss.l1", "must be >= 0");
    require(loss.opacity >= 0.0, "loss.opacity", "must be >= 0");
    require(loss.gan == 0.0, "loss.gan", "adversarial loss is not supported; must be 0");
    require(loss.perceptual == 0.0, "loss.perceptual", "perceptual loss is not supported; must be 0");
    require(loss.kl == 0.0, "loss.kl", "KL loss is not supported; must be 0");
    require(lr_network > 0.0, "lr_network", "must be positive");
    require(lr_features > 0.0, "lr_features", "must be positive");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1", "must lie in [0, 1)");
    require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2", "must lie in [0, 1)");
    require(adam_eps > 0.0, "adam_eps", "must be positive");
    require(camera.height_min >= 0.0, "camera.height_min", "must be >= 0");
    require(camera.height_max >= camera.height_min, "camera.height_max", "must be >= camera.height_min");
    require(camera.min_mean_depth >= 0.0, "camera.min_mean_depth", "must be >= 0");
    require(camera.min_entropy >= 0.0, "camera.min_entropy", "must be >= 0");
    require(camera.retries >= 1, "camera.retries", "must be >= 1");
    require(camera.fov_y > 0.0 && camera.fov_y < std::numbers::pi, "camera.fov_y", "must lie in (0, pi)");
    require(norm(oracle.light) > 0.0, "oracle.light_x", "light direction must be nonzero");
    require(oracle.ambient >= 0.0, "oracle.ambient", "must be >= 0");
    require(oracle.diffuse >= 0.0, "oracle.diffuse", "must be >= 0");
    require(train_width >= 1, "train_width", "must be >= 1");
    require(train_height >= 1, "train_height", "must be >= 1");
    require(iterations >= 0, "iterations", "must be >= 0");
    require(checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
    require(threads >= 1, "threads", "must be >= 1");
}

Config parse_config(std::string_view text) {
    Config c;
    auto table = fields(c);
    for (const auto& [key, value] : parse_key_values(text)) {
        auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
        if (it == table.end()) fail(key, "unknown setting");
        std::visit(
            [&](auto* p) {
                using T = std::remove_pointer_t<decltype(p)>;
                if constexpr (std::is_same_v<T, double>) {
                    *p = parse_double_field(key, value);
                } else if constexpr (std::is_same_v<T, bool>) {
                    if (value == "true" || value == "1") *p = true;
                    else if (value == "false" || value == "0") *p = false;
                    else fail(key, "expected true or false, got '" + value + "'");
                } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                    const long long v = parse_int_field(key, value);
                    if (v < 0) fail(key, "must be >= 0");
                    *p = static_cast<std::uint64_t>(v);
                } else {
                    const long long v = parse_int_field(key, value);
                    if (v < -(1ll << 30) || v > (1ll << 30)) fail(key, "out of range");
                    *p = static_cast<int>(v);
                }
            },
            it->ptr);
    }
    c.validate();
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string format_config(const Config& config) {
    Config copy = config;
    std::ostringstream out;
    out.precision(17);
    for (const Field& f : fields(copy)) {
        out << f.key << '=';
        std::visit(
            [&](auto* p) {
                if constexpr (std::is_same_v<std::remove_pointer_t<decltype(p)>, bool>) out << (*p ? "true" : "false");
                else out << *p;
            },
            f.ptr);
        out << '\n';
    }
    return out.str();
}

} // namespace voxelfield
