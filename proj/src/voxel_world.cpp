#include "voxelfield/voxel_world.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <random>
#include <sstream>

namespace voxelfield {

VoxelWorld::VoxelWorld(int dim_x, int dim_y, int dim_z) : dims_{dim_x, dim_y, dim_z} {
    for (int d : dims_) {
        if (d <= 0 || d > kMaxAxis) throw std::invalid_argument("voxel world dimensions must be positive");
    }
}

LabelId VoxelWorld::intern(std::string_view raw_name, LabelClass cls) {
    for (std::size_t i = 0; i < raw_names_.size(); ++i) {
        if (raw_names_[i] == raw_name) return LabelId{static_cast<std::uint16_t>(i), raw_classes_[i]};
    }
    if (raw_names_.size() >= 0xFFFF) throw std::length_error("too many distinct raw labels");
    raw_names_.emplace_back(raw_name);
    raw_classes_.push_back(cls);
    return LabelId{static_cast<std::uint16_t>(raw_names_.size() - 1), cls};
}

bool VoxelWorld::insert(VoxelCoord c, LabelId label) {
    if (!in_bounds(c)) throw std::out_of_range("voxel coordinate outside the grid");
    return cells_.emplace(pack_coord(c.x, c.y, c.z), label).second;
}

double VoxelWorld::occupancy_ratio() const {
    const double volume = static_cast<double>(dims_[0]) * dims_[1] * dims_[2];
    return static_cast<double>(cells_.size()) / volume;
}

std::vector<std::pair<VoxelCoord, LabelId>> VoxelWorld::sorted_voxels() const {
    std::vector<std::pair<VoxelCoord, LabelId>> out;
    out.reserve(cells_.size());
    constexpr std::uint64_t mask = (1u << 21) - 1;
    for (const auto& [key, label] : cells_) {
        out.push_back({VoxelCoord{static_cast<int>(key >> 42), static_cast<int>((key >> 21) & mask),
                                  static_cast<int>(key & mask)},
                       label});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

int VoxelWorld::column_top(int x, int z) const {
    for (int y = dims_[1] - 1; y >= 0; --y) {
        if (occupied({x, y, z})) return y;
    }
    return -1;
}

// ---------------------------------------------------------------------------
// GVOX text format

namespace {

struct LineCursor {
    std::string_view text;
    std::size_t pos = 0;

    // Next non-blank line with comments stripped; `offset` is where it starts.
    bool next(std::string_view& line, std::size_t& offset) {
        while (pos < text.size()) {
            const std::size_t start = pos;
            std::size_t end = text.find('\n', pos);
            if (end == std::string_view::npos) end = text.size();
            pos = end + 1;
            std::string_view l = text.substr(start, end - start);
            if (auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
            if (l.find_first_not_of(" \t\r") == std::string_view::npos) continue;
            line = l;
            offset = start;
            return true;
        }
        return false;
    }
};

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

bool parse_int(std::string_view s, int& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace

VoxelWorld parse_world(std::string_view text, const LabelScheme& scheme, int max_dim) {
    LineCursor cursor{text};
    std::string_view line;
    std::size_t offset = 0;
    if (!cursor.next(line, offset)) throw ParseError("missing gvox header", 0);

    auto header = split_ws(line);
    int dims[3] = {0, 0, 0};
    if (header.size() != 5 || header[0] != "gvox") throw ParseError("malformed header", offset);
    if (header[1] != "1") throw ParseError("unsupported gvox version '" + std::string(header[1]) + "'", offset);
    for (int a = 0; a < 3; ++a) {
        if (!parse_int(header[2 + a], dims[a]) || dims[a] <= 0) {
            throw ParseError("malformed header dimension", offset);
        }
        if (dims[a] > max_dim || dims[a] > VoxelWorld::kMaxAxis) {
            throw ParseError("dimension " + std::to_string(dims[a]) + " exceeds maximum " +
                                 std::to_string(max_dim),
                             offset);
        }
    }

    VoxelWorld world(dims[0], dims[1], dims[2]);
    while (cursor.next(line, offset)) {
        auto fields = split_ws(line);
        VoxelCoord c;
        if (fields.size() != 4 || !parse_int(fields[0], c.x) || !parse_int(fields[1], c.y) ||
            !parse_int(fields[2], c.z)) {
            throw ParseError("malformed voxel line, expected 'x y z label'", offset);
        }
        if (!world.in_bounds(c)) throw ParseError("voxel coordinate outside the grid", offset);
        auto cls = scheme.lookup(fields[3]);
        if (!cls) throw ParseError("unknown label '" + std::string(fields[3]) + "'", offset);
        if (!world.insert(c, world.intern(fields[3], *cls))) throw ParseError("duplicate voxel", offset);
    }
    if (world.empty()) throw ParseError("world has no voxels", text.size());
    return world;
}

VoxelWorld load_world(const std::filesystem::path& path, const LabelScheme& scheme, int max_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open world file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_world(buffer.str(), scheme, max_dim);
}

std::string format_world(const VoxelWorld& world) {
    std::ostringstream out;
    const auto d = world.dims();
    out << "gvox 1 " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n';
    for (const auto& [c, label] : world.sorted_voxels()) {
        out << c.x << ' ' << c.y << ' ' << c.z << ' ' << world.raw_names()[label.raw] << '\n';
    }
    return out.str();
}

void save_world(const std::filesystem::path& path, const VoxelWorld& world) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write world file " + path.string());
    out << format_world(world);
    if (!out) throw std::runtime_error("failed writing world file " + path.string());
}

// ---------------------------------------------------------------------------

VoxelWorld shell_extract(const VoxelWorld& world, int thickness) {
    if (thickness < 1) throw std::invalid_argument("shell thickness must be >= 1");
    const auto dims = world.dims();
    constexpr int kNeighbors[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};

    const auto voxels = world.sorted_voxels();
    std::unordered_map<std::uint64_t, int> distance;
    distance.reserve(voxels.size());
    std::deque<VoxelCoord> frontier;

    for (const auto& [c, label] : voxels) {
        bool exposed = false;
        for (const auto& n : kNeighbors) {
            const VoxelCoord nb{c.x + n[0], c.y + n[1], c.z + n[2]};
            if (world.in_bounds(nb) ? !world.occupied(nb) : nb.y >= dims[1]) {
                exposed = true;
                break;
            }
        }
        if (exposed) {
            distance.emplace(pack_coord(c.x, c.y, c.z), 1);
            frontier.push_back(c);
        }
    }

    while (!frontier.empty()) {
        const VoxelCoord c = frontier.front();
        frontier.pop_front();
        const int d = distance.at(pack_coord(c.x, c.y, c.z));
        if (d >= thickness) continue;
        for (const auto& n : kNeighbors) {
            const VoxelCoord nb{c.x + n[0], c.y + n[1], c.z + n[2]};
            if (!world.occupied(nb)) continue;
            if (distance.emplace(pack_coord(nb.x, nb.y, nb.z), d + 1).second) frontier.push_back(nb);
        }
    }

    VoxelWorld out = world;
    out.clear();
    for (const auto& [c, label] : voxels) {
        if (distance.contains(pack_coord(c.x, c.y, c.z))) out.insert(c, label);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corner features

FeatureTable::FeatureTable(std::vector<VertexKey> keys, Matrix values)
    : keys_(std::move(keys)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.rows()) != keys_.size()) {
        throw std::invalid_argument("feature table rows must match vertex count");
    }
    index_.reserve(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        const auto& k = keys_[i];
        if (!index_.emplace(pack_coord(k.x, k.y, k.z), static_cast<std::uint32_t>(i)).second) {
            throw std::invalid_argument("duplicate vertex key in feature table");
        }
    }
}

std::optional<std::uint32_t> FeatureTable::index_of(VertexKey k) const {
    auto it = index_.find(pack_coord(k.x, k.y, k.z));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::span<const double> FeatureTable::entry(VertexKey k) const {
    auto idx = index_of(k);
    if (!idx) throw std::out_of_range("vertex not in feature table");
    return {values_.data() + static_cast<std::size_t>(*idx) * values_.cols(),
            static_cast<std::size_t>(values_.cols())};
}

std::vector<VertexKey> collect_vertices(const VoxelWorld& world) {
    std::vector<VertexKey> keys;
    keys.reserve(world.size() * 2);
    for (const auto& [c, label] : world.sorted_voxels()) {
        for (int k = 0; k < 8; ++k) keys.push_back({c.x + (k & 1), c.y + ((k >> 1) & 1), c.z + ((k >> 2) & 1)});
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

FeatureTable init_features(const VoxelWorld& world, int dim, std::uint64_t seed, double scale) {
    if (dim < 2) throw std::invalid_argument("feature dim must be >= 2");
    auto keys = collect_vertices(world);
    Matrix values(static_cast<Eigen::Index>(keys.size()), dim);
    std::mt19937_64 rng(seed);
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        values.data()[i] = (2.0 * u - 1.0) * scale;
    }
    return FeatureTable(std::move(keys), std::move(values));
}

CornerStencil corner_stencil(const FeatureTable& table, VoxelCoord v, Vec3 p) {
    const double f[3] = {std::clamp(p.x - v.x, 0.0, 1.0), std::clamp(p.y - v.y, 0.0, 1.0),
                         std::clamp(p.z - v.z, 0.0, 1.0)};
    CornerStencil s;
    for (int k = 0; k < 8; ++k) {
        const int dx = k & 1, dy = (k >> 1) & 1, dz = (k >> 2) & 1;
        auto idx = table.index_of({v.x + dx, v.y + dy, v.z + dz});
        if (!idx) throw std::out_of_range("voxel corner missing from feature table");
        s.index[k] = *idx;
        s.weight[k] = (dx ? f[0] : 1.0 - f[0]) * (dy ? f[1] : 1.0 - f[1]) * (dz ? f[2] : 1.0 - f[2]);
    }
    return s;
}

std::optional<LocationCode> location_code_in(const VoxelWorld& world, const FeatureTable& table,
                                             VoxelCoord v, Vec3 p) {
    const LabelId* label = world.find(v);
    if (!label) return std::nullopt;
    const auto stencil = corner_stencil(table, v, p);
    LocationCode out{std::vector<double>(static_cast<std::size_t>(table.dim()), 0.0), *label};
    const Matrix& values = table.values();
    for (int k = 0; k < 8; ++k) {
        const double w = stencil.weight[k];
        const double* row = values.data() + static_cast<std::size_t>(stencil.index[k]) * values.cols();
        for (std::size_t j = 0; j < out.code.size(); ++j) out.code[j] += w * row[j];
    }
    return out;
}

std::optional<LocationCode> location_code(const VoxelWorld& world, const FeatureTable& table, Vec3 p) {
    const VoxelCoord v{static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y)),
                       static_cast<int>(std::floor(p.z))};
    return location_code_in(world, table, v, p);
}

} // namespace voxelfield
