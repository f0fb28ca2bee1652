#include "voxelfield/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "voxelfield/keyvalue.hpp"

namespace voxelfield {

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw std::invalid_argument(std::string(name) + " must be >= 1");
    };
    positive(feature_dim, "feature_dim");
    positive(hidden, "hidden");
    positive(color_dim, "color_dim");
    positive(style_dim, "style_dim");
    positive(style_feature_dim, "style_feature_dim");
    positive(label_dim, "label_dim");
    positive(trunk_layers, "trunk_layers");
    positive(feature_layers, "feature_layers");
    positive(refiner_width, "refiner_width");
    positive(refiner_layers, "refiner_layers");
    if (feature_dim < 2) throw std::invalid_argument("feature_dim must be >= 2");
    if (encoded_channels < 0 || encoded_channels > feature_dim) {
        throw std::invalid_argument("encoded_channels must lie in [0, feature_dim]");
    }
    if (n_freq < 0) throw std::invalid_argument("n_freq must be >= 0");
    if (sky_freq < 0) throw std::invalid_argument("sky_freq must be >= 0");
    if (color_dim < 3) throw std::invalid_argument("color_dim must be >= 3");
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw std::invalid_argument("leaky_slope must lie in [0, 1)");
    if (!(demod_eps > 0.0)) throw std::invalid_argument("demod_eps must be > 0");
    if (!(feature_init_scale >= 0.0)) throw std::invalid_argument("feature_init_scale must be >= 0");
}

// ---- ParameterStore --------------------------------------------------------------------------

Matrix& ParameterStore::add(std::string_view group, std::string_view name, Matrix value) {
    for (const auto& e : entries_) {
        if (e.group == group && e.name == name) {
            throw std::invalid_argument("duplicate parameter " + std::string(group) + "/" + std::string(name));
        }
    }
    entries_.push_back(NamedParameter{std::string(group), std::string(name), std::move(value)});
    return entries_.back().value;
}

std::size_t ParameterStore::index_of(std::string_view group, std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].group == group && entries_[i].name == name) return i;
    }
    throw std::out_of_range("no parameter " + std::string(group) + "/" + std::string(name));
}

Matrix& ParameterStore::at(std::string_view group, std::string_view name) {
    return entries_[index_of(group, name)].value;
}

const Matrix& ParameterStore::at(std::string_view group, std::string_view name) const {
    return entries_[index_of(group, name)].value;
}

// ---- initialization --------------------------------------------------------------------------

namespace {

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    Matrix uniform(int rows, int cols, double bound) {
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
            m.data()[i] = (2.0 * u - 1.0) * bound;
        }
        return m;
    }
    // Kaiming-uniform for leaky-ReLU layers.
    Matrix kaiming(int rows, int fan_in, double slope) {
        return uniform(rows, fan_in, std::sqrt(6.0 / ((1.0 + slope * slope) * fan_in)));
    }

private:
    std::mt19937_64 rng_;
};

void add_mod_linear(ParameterStore& store, Initializer& init, std::string_view group, const std::string& prefix,
                    int in, int out, int style_width) {
    store.add(group, prefix + ".weight", init.uniform(out, in, 1.0 / std::sqrt(in)));
    store.add(group, prefix + ".bias", Matrix::Zero(1, out));
    store.add(group, prefix + ".style_map", init.uniform(in, style_width, 0.1 / std::sqrt(style_width)));
    store.add(group, prefix + ".style_bias", Matrix::Ones(1, in));
}

} // namespace

Model init_model(const VoxelWorld& world, const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model model;
    model.config = cfg;
    model.features = init_features(world, cfg.feature_dim, seed, cfg.feature_init_scale);

    Initializer init(seed ^ 0x5DEECE66Dull);
    ParameterStore& p = model.params;
    const int w = cfg.style_feature_dim;
    const double slope = cfg.leaky_slope;

    p.add(kStyleGroup, "l0.weight", init.kaiming(w, cfg.style_dim, slope));
    p.add(kStyleGroup, "l0.bias", Matrix::Zero(1, w));
    p.add(kStyleGroup, "l1.weight", init.uniform(w, w, 1.0 / std::sqrt(w)));
    p.add(kStyleGroup, "l1.bias", Matrix::Zero(1, w));

    p.add(kFieldGroup, "label_embedding", init.uniform(static_cast<int>(kNumClasses), cfg.label_dim, 0.5));
    int in = cfg.field_input_width();
    for (int i = 0; i < cfg.trunk_layers; ++i) {
        const std::string prefix = "trunk" + std::to_string(i);
        p.add(kFieldGroup, prefix + ".weight", init.kaiming(cfg.hidden, in, slope));
        p.add(kFieldGroup, prefix + ".bias", Matrix::Zero(1, cfg.hidden));
        in = cfg.hidden;
    }
    p.add(kFieldGroup, "density.weight", init.uniform(1, cfg.hidden, 1.0 / std::sqrt(cfg.hidden)));
    p.add(kFieldGroup, "density.bias", Matrix::Zero(1, 1));
    for (int i = 0; i < cfg.feature_layers; ++i) {
        const int out = i + 1 == cfg.feature_layers ? cfg.color_dim : cfg.hidden;
        add_mod_linear(p, init, kFieldGroup, "feat" + std::to_string(i), cfg.hidden, out, w);
    }

    add_mod_linear(p, init, kSkyGroup, "mod0", cfg.sky_input_width(), cfg.hidden, w);
    add_mod_linear(p, init, kSkyGroup, "mod1", cfg.hidden, cfg.hidden, w);
    p.add(kSkyGroup, "out.weight", init.uniform(cfg.color_dim, cfg.hidden, 1.0 / std::sqrt(cfg.hidden)));
    p.add(kSkyGroup, "out.bias", Matrix::Zero(1, cfg.color_dim));

    int channels = cfg.color_dim;
    for (int i = 0; i < cfg.refiner_layers; ++i) {
        const std::string prefix = "conv" + std::to_string(i);
        p.add(kRefinerGroup, prefix + ".weight", init.kaiming(cfg.refiner_width, channels * 9, slope));
        p.add(kRefinerGroup, prefix + ".bias", Matrix::Zero(1, cfg.refiner_width));
        p.add(kRefinerGroup, prefix + ".scale_map", init.uniform(cfg.refiner_width, w, 0.1 / std::sqrt(w)));
        p.add(kRefinerGroup, prefix + ".scale_bias", Matrix::Ones(1, cfg.refiner_width));
        p.add(kRefinerGroup, prefix + ".shift_map", init.uniform(cfg.refiner_width, w, 0.1 / std::sqrt(w)));
        p.add(kRefinerGroup, prefix + ".shift_bias", Matrix::Zero(1, cfg.refiner_width));
        channels = cfg.refiner_width;
    }
    p.add(kRefinerGroup, "head.weight", init.uniform(3, channels, 1.0 / std::sqrt(channels)));
    p.add(kRefinerGroup, "head.bias", Matrix::Zero(1, 3));
    return model;
}

std::vector<ParameterRef> parameter_refs(Model& model) {
    std::vector<ParameterRef> refs;
    refs.push_back({kVertexGroup, "features", &model.features.values()});
    for (auto& e : model.params.entries()) refs.push_back({e.group, e.name, &e.value});
    return refs;
}

std::vector<std::string> group_names(const Model& model) {
    std::vector<std::string> names{std::string(kVertexGroup)};
    for (const auto& e : model.params.entries()) {
        if (std::find(names.begin(), names.end(), e.group) == names.end()) names.push_back(e.group);
    }
    return names;
}

// ---- BoundModel ------------------------------------------------------------------------------

BoundModel::BoundModel(ad::Tape& tape, const Model& model, bool differentiable) : model_(&model) {
    auto bind = [&](const Matrix& m) { return differentiable ? tape.leaf(m) : tape.constant(m); };
    features_ = bind(model.features.values());
    vars_.reserve(model.params.size());
    for (const auto& e : model.params.entries()) vars_.push_back(bind(e.value));
}

ad::Var BoundModel::operator()(std::string_view group, std::string_view name) const {
    return vars_[model_->params.index_of(group, name)];
}

std::vector<Matrix> BoundModel::gradients(const ad::Tape& tape) const {
    std::vector<Matrix> out;
    out.reserve(vars_.size() + 1);
    out.push_back(tape.grad(features_));
    for (ad::Var v : vars_) out.push_back(tape.grad(v));
    return out;
}

// ---- config text -----------------------------------------------------------------------------

std::string format_model_config(const ModelConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "feature_dim=" << c.feature_dim << '\n'
        << "encoded_channels=" << c.encoded_channels << '\n'
        << "n_freq=" << c.n_freq << '\n'
        << "sky_freq=" << c.sky_freq << '\n'
        << "hidden=" << c.hidden << '\n'
        << "color_dim=" << c.color_dim << '\n'
        << "style_dim=" << c.style_dim << '\n'
        << "style_feature_dim=" << c.style_feature_dim << '\n'
        << "label_dim=" << c.label_dim << '\n'
        << "trunk_layers=" << c.trunk_layers << '\n'
        << "feature_layers=" << c.feature_layers << '\n'
        << "refiner_width=" << c.refiner_width << '\n'
        << "refiner_layers=" << c.refiner_layers << '\n'
        << "leaky_slope=" << c.leaky_slope << '\n'
        << "demod_eps=" << c.demod_eps << '\n'
        << "feature_init_scale=" << c.feature_init_scale << '\n';
    return out.str();
}

ModelConfig parse_model_config(std::string_view text) {
    ModelConfig c;
    for (const auto& [key, value] : parse_key_values(text)) {
        auto as_int = [&] { return static_cast<int>(parse_int_field(key, value)); };
        if (key == "feature_dim") c.feature_dim = as_int();
        else if (key == "encoded_channels") c.encoded_channels = as_int();
        else if (key == "n_freq") c.n_freq = as_int();
        else if (key == "sky_freq") c.sky_freq = as_int();
        else if (key == "hidden") c.hidden = as_int();
        else if (key == "color_dim") c.color_dim = as_int();
        else if (key == "style_dim") c.style_dim = as_int();
        else if (key == "style_feature_dim") c.style_feature_dim = as_int();
        else if (key == "label_dim") c.label_dim = as_int();
        else if (key == "trunk_layers") c.trunk_layers = as_int();
        else if (key == "feature_layers") c.feature_layers = as_int();
        else if (key == "refiner_width") c.refiner_width = as_int();
        else if (key == "refiner_layers") c.refiner_layers = as_int();
        else if (key == "leaky_slope") c.leaky_slope = parse_double_field(key, value);
        else if (key == "demod_eps") c.demod_eps = parse_double_field(key, value);
        else if (key == "feature_init_scale") c.feature_init_scale = parse_double_field(key, value);
        else throw std::runtime_error("unknown model setting '" + key + "'");
    }
    c.validate();
    return c;
}

// ---- checkpoint ------------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'V', 'F', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw std::runtime_error("checkpoint truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

void write_string(std::ostream& out, std::string_view s) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, std::size_t limit) {
    const auto n = read_le<std::uint32_t>(in);
    if (n > limit) throw std::runtime_error("checkpoint string too long");
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw std::runtime_error("checkpoint truncated");
    return s;
}

void write_tensor(std::ostream& out, std::string_view group, std::string_view name, const Matrix& m) {
    write_string(out, group);
    write_string(out, name);
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) write_le<double>(out, m.data()[i]);
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_le<std::uint32_t>(out, kVersion);
    write_string(out, format_model_config(model.config));
    write_le<std::uint64_t>(out, model.features.size());
    for (const auto& k : model.features.keys()) {
        write_le<std::int32_t>(out, k.x);
        write_le<std::int32_t>(out, k.y);
        write_le<std::int32_t>(out, k.z);
    }
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.params.size() + 1));
    write_tensor(out, kVertexGroup, "features", model.features.values());
    for (const auto& e : model.params.entries()) write_tensor(out, e.group, e.name, e.value);
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    char magic[sizeof(kMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path.string());
    }
    if (const auto version = read_le<std::uint32_t>(in); version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    Model model;
    model.config = parse_model_config(read_string(in, 1 << 20));

    const auto n_keys = read_le<std::uint64_t>(in);
    if (n_keys > (1ull << 32)) throw std::runtime_error("checkpoint vertex count out of range");
    std::vector<VertexKey> keys(n_keys);
    for (auto& k : keys) {
        k.x = read_le<std::int32_t>(in);
        k.y = read_le<std::int32_t>(in);
        k.z = read_le<std::int32_t>(in);
    }

    const auto n_tensors = read_le<std::uint32_t>(in);
    bool have_features = false;
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        std::string group = read_string(in, 256);
        std::string name = read_string(in, 256);
        const auto rows = read_le<std::uint64_t>(in);
        const auto cols = read_le<std::uint64_t>(in);
        if (rows > (1ull << 32) || cols > (1ull << 20)) throw std::runtime_error("checkpoint tensor shape out of range");
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = read_le<double>(in);
        if (group == kVertexGroup && name == "features") {
            model.features = FeatureTable(keys, std::move(m));
            have_features = true;
        } else {
            model.params.add(group, name, std::move(m));
        }
    }
    if (!have_features) throw std::runtime_error("checkpoint has no vertex features");
    return model;
}

} // namespace voxelfield
