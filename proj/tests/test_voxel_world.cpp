#include <doctest.h>

#include <cmath>
#include <deque>
#include <random>
#include <set>

#include "voxelfield/fixtures.hpp"
#include "voxelfield/voxel_world.hpp"

using namespace voxelfield;

namespace {

constexpr int kNeighbors[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};

bool has_exposed_face(const VoxelWorld& w, VoxelCoord c) {
    for (const auto& o : kNeighbors) {
        const VoxelCoord n{c.x + o[0], c.y + o[1], c.z + o[2]};
        if (n.y >= w.dims()[1] || (w.in_bounds(n) && !w.occupied(n))) return true;
    }
    return false;
}

// Independent per-voxel search: shortest 6-connected walk through solid voxels from `c` to any
// voxel with an exposed face, counting the exposed voxel as distance 1.
int distance_to_surface(const VoxelWorld& w, VoxelCoord start) {
    std::set<VoxelCoord> seen{start};
    std::deque<std::pair<VoxelCoord, int>> queue{{start, 1}};
    while (!queue.empty()) {
        auto [c, d] = queue.front();
        queue.pop_front();
        if (has_exposed_face(w, c)) return d;
        for (const auto& o : kNeighbors) {
            const VoxelCoord n{c.x + o[0], c.y + o[1], c.z + o[2]};
            if (w.occupied(n) && seen.insert(n).second) queue.emplace_back(n, d + 1);
        }
    }
    return 1 << 30;
}

VoxelWorld solid_cube(int side, int pad) {
    VoxelWorld w(side + 2 * pad, side + 2 * pad, side + 2 * pad);
    for (int x = 0; x < side; ++x)
        for (int y = 0; y < side; ++y)
            for (int z = 0; z < side; ++z) w.insert({x + pad, y + pad, z + pad}, LabelClass::Stone);
    return w;
}

bool same_voxels(const VoxelWorld& a, const VoxelWorld& b) {
    const auto va = a.sorted_voxels(), vb = b.sorted_voxels();
    if (va.size() != vb.size()) return false;
    for (std::size_t i = 0; i < va.size(); ++i) {
        if (va[i].first != vb[i].first || va[i].second.cls != vb[i].second.cls) return false;
    }
    return true;
}

std::vector<double> code_at(const VoxelWorld& w, const FeatureTable& t, VoxelCoord v, Vec3 p) {
    auto code = location_code_in(w, t, v, p);
    REQUIRE(code.has_value());
    return code->code;
}

} // namespace

TEST_CASE("parse a minimal world") {
    const LabelScheme scheme;
    const VoxelWorld w = parse_world("gvox 1 4 5 6\n0 0 0 grass\n", scheme);
    CHECK(w.size() == 1);
    CHECK(w.dims() == std::array<int, 3>{4, 5, 6});
    REQUIRE(w.find({0, 0, 0}) != nullptr);
    CHECK(w.find({0, 0, 0})->cls == LabelClass::Grass);
}

TEST_CASE("parse translates raw names and keeps them") {
    const LabelScheme scheme;
    const VoxelWorld w = parse_world("# world\ngvox 1 2 2 2\n0 0 0 oak_log # trunk\n1 0 0 oak_leaves\n\n", scheme);
    CHECK(w.size() == 2);
    CHECK(w.find({0, 0, 0})->cls == LabelClass::Tree);
    CHECK(w.raw_names()[w.find({1, 0, 0})->raw] == "oak_leaves");
}

TEST_CASE("parse errors carry byte offsets") {
    const LabelScheme scheme;
    auto error_of = [&](const std::string& text) -> std::string {
        try {
            parse_world(text, scheme, 64);
        } catch (const ParseError& e) {
            return e.what();
        }
        return "no error";
    };
    CHECK(error_of("gvox 1 2 2 2\n0 0 0 grass\n0 0 0 dirt\n") == "duplicate voxel (at byte 25)");
    CHECK(error_of("") == "missing gvox header (at byte 0)");
    CHECK(error_of("vox 1 2 2 2\n") == "malformed header (at byte 0)");
    CHECK(error_of("gvox 2 2 2 2\n0 0 0 grass\n").find("unsupported gvox version") == 0);
    CHECK(error_of("gvox 1 2 100 2\n").find("exceeds maximum 64") != std::string::npos);
    CHECK(error_of("gvox 1 2 2 2\n0 0 0 unobtainium\n") == "unknown label 'unobtainium' (at byte 13)");
    CHECK(error_of("gvox 1 2 2 2\n0 0 grass\n") .find("malformed voxel line") == 0);
    CHECK(error_of("gvox 1 2 2 2\n0 2 0 grass\n").find("outside the grid") != std::string::npos);
    CHECK(error_of("gvox 1 2 2 2\n# nothing\n").find("no voxels") != std::string::npos);
}

TEST_CASE("format and parse round trip") {
    const LabelScheme scheme;
    const auto t = fixtures::terrain(12, 10, 9, 3);
    const VoxelWorld back = parse_world(format_world(t.world), scheme);
    CHECK(back.dims() == t.world.dims());
    CHECK(same_voxels(back, t.world));
}

TEST_CASE("terrain fixture voxel count matches generation") {
    const auto t = fixtures::terrain();
    CHECK(t.world.dims() == std::array<int, 3>{32, 16, 32});
    CHECK(t.world.size() == t.voxel_count);
    std::size_t counted = 0;
    for (int x = 0; x < 32; ++x)
        for (int y = 0; y < 16; ++y)
            for (int z = 0; z < 32; ++z) counted += t.world.occupied({x, y, z}) ? 1 : 0;
    CHECK(counted == t.voxel_count);
}

TEST_CASE("world insertion rules") {
    VoxelWorld w(3, 3, 3);
    CHECK(w.insert({1, 1, 1}, LabelClass::Dirt));
    CHECK_FALSE(w.insert({1, 1, 1}, LabelClass::Sand));
    CHECK_THROWS_AS(w.insert({3, 0, 0}, LabelClass::Sand), std::out_of_range);
    CHECK(w.column_top(1, 1) == 1);
    CHECK(w.column_top(0, 0) == -1);
    CHECK(w.occupancy_ratio() == doctest::Approx(1.0 / 27.0));
}

TEST_CASE("shell of a solid cube") {
    const VoxelWorld cube = solid_cube(10, 1);
    CHECK(cube.size() == 1000);
    const VoxelWorld shell = shell_extract(cube, 4);

    std::size_t expected = 0;
    for (const auto& [c, label] : cube.sorted_voxels()) {
        const bool keep = distance_to_surface(cube, c) <= 4;
        expected += keep ? 1 : 0;
        CHECK(shell.occupied(c) == keep);
    }
    CHECK(expected == 992);
    CHECK(shell.size() == 992);
    // The removed core is the central 2 x 2 x 2 block.
    for (int x = 5; x <= 6; ++x)
        for (int y = 5; y <= 6; ++y)
            for (int z = 5; z <= 6; ++z) CHECK_FALSE(shell.occupied({x, y, z}));
}

TEST_CASE("shell against brute force on random blobs") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const VoxelWorld w = fixtures::random_world(10, 0.8, seed);
        for (int thickness : {1, 2, 3}) {
            const VoxelWorld shell = shell_extract(w, thickness);
            for (const auto& [c, label] : w.sorted_voxels()) {
                CHECK(shell.occupied(c) == (distance_to_surface(w, c) <= thickness));
            }
        }
    }
}

TEST_CASE("shell properties") {
    SUBCASE("single voxel is kept") {
        VoxelWorld w(3, 3, 3);
        w.insert({1, 1, 1}, LabelClass::Grass);
        CHECK(same_voxels(shell_extract(w), w));
    }
    SUBCASE("empty world stays empty") { CHECK(shell_extract(VoxelWorld(4, 4, 4)).empty()); }
    SUBCASE("thickness must be positive") { CHECK_THROWS(shell_extract(VoxelWorld(4, 4, 4), 0)); }
    SUBCASE("terrain: smaller, idempotent, surface kept") {
        const auto t = fixtures::terrain();
        const VoxelWorld shell = shell_extract(t.world, 4);
        CHECK(shell.occupancy_ratio() < t.world.occupancy_ratio());
        CHECK(same_voxels(shell_extract(shell, 4), shell));
        std::size_t surface = 0;
        for (const auto& [c, label] : t.world.sorted_voxels()) {
            if (!has_exposed_face(t.world, c)) continue;
            ++surface;
            CHECK(shell.occupied(c));
            CHECK(shell.find(c)->cls == label.cls);
        }
        CHECK(surface == t.exposed_count);
    }
}

TEST_CASE("feature table corner sharing") {
    VoxelWorld one(4, 4, 4);
    one.insert({1, 1, 1}, LabelClass::Grass);
    CHECK(init_features(one, 64, 1).size() == 8);
    CHECK(init_features(one, 64, 1).dim() == 64);

    VoxelWorld two(4, 4, 4);
    two.insert({1, 1, 1}, LabelClass::Grass);
    two.insert({2, 1, 1}, LabelClass::Grass);
    const FeatureTable t = init_features(two, 64, 1);
    CHECK(t.size() == 12);
    // Shared corners resolve to the same row from either voxel.
    const auto left = corner_stencil(t, {1, 1, 1}, Vec3{1.5, 1.5, 1.5});
    const auto right = corner_stencil(t, {2, 1, 1}, Vec3{2.5, 1.5, 1.5});
    for (int k : {1, 3, 5, 7}) CHECK(left.index[k] == right.index[k - 1]);
}

TEST_CASE("feature init is deterministic and bounded") {
    const auto t = fixtures::terrain(8, 8, 8, 2);
    const FeatureTable a = init_features(t.world, 16, 42);
    const FeatureTable b = init_features(t.world, 16, 42);
    const FeatureTable c = init_features(t.world, 16, 43);
    CHECK(a.values() == b.values());
    CHECK(a.values() != c.values());
    CHECK(a.values().maxCoeff() <= 0.1);
    CHECK(a.values().minCoeff() >= -0.1);
    CHECK(a.keys() == collect_vertices(t.world));
}

TEST_CASE("location code at centers and corners") {
    VoxelWorld w(3, 3, 3);
    w.insert({1, 0, 2}, LabelClass::Sand);
    const FeatureTable t = init_features(w, 6, 9);
    const auto center = code_at(w, t, {1, 0, 2}, Vec3{1.5, 0.5, 2.5});
    for (int j = 0; j < 6; ++j) {
        double mean = 0;
        for (const auto& key : t.keys()) mean += t.entry(key)[j] / 8.0;
        CHECK(center[j] == doctest::Approx(mean).epsilon(1e-14));
    }
    const auto corner = code_at(w, t, {1, 0, 2}, Vec3{2.0, 1.0, 2.0});
    const auto expected = t.entry({2, 1, 2});
    for (int j = 0; j < 6; ++j) CHECK(corner[j] == expected[j]);

    CHECK_FALSE(location_code(w, t, Vec3{0.5, 0.5, 0.5}).has_value());
    const auto found = location_code(w, t, Vec3{1.25, 0.75, 2.5});
    REQUIRE(found.has_value());
    CHECK(found->label.cls == LabelClass::Sand);
}

TEST_CASE("trilinear reproduction of a constant field") {
    VoxelWorld w(2, 2, 2);
    w.insert({0, 0, 0}, LabelClass::Dirt);
    FeatureTable t = init_features(w, 4, 1);
    for (Eigen::Index r = 0; r < t.values().rows(); ++r) t.values().row(r) << 0.3, -0.7, 0.0, 1.0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const auto code = code_at(w, t, {0, 0, 0}, Vec3{u(rng), u(rng), u(rng)});
        CHECK(code[0] == doctest::Approx(0.3).epsilon(1e-14));
        CHECK(code[1] == doctest::Approx(-0.7).epsilon(1e-14));
        CHECK(std::abs(code[2]) < 1e-15);
        CHECK(code[3] == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("codes agree across a shared face") {
    const VoxelWorld w = fixtures::random_world(6, 0.6, 21);
    const FeatureTable t = init_features(w, 8, 4);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (const auto& [c, label] : w.sorted_voxels()) {
        for (int axis = 0; axis < 3; ++axis) {
            VoxelCoord n = c;
            (axis == 0 ? n.x : axis == 1 ? n.y : n.z) += 1;
            if (!w.occupied(n)) continue;
            Vec3 p{c.x + u(rng), c.y + u(rng), c.z + u(rng)};
            p[axis] = (axis == 0 ? c.x : axis == 1 ? c.y : c.z) + 1.0;
            const double eps = 1e-9;
            Vec3 below = p, above = p;
            below[axis] -= eps;
            above[axis] += eps;
            const auto a = code_at(w, t, c, below);
            const auto b = code_at(w, t, n, above);
            const auto on_a = code_at(w, t, c, p);
            const auto on_b = code_at(w, t, n, p);
            for (int j = 0; j < 8; ++j) {
                CHECK(std::abs(a[j] - b[j]) < 1e-6);
                CHECK(std::abs(on_a[j] - on_b[j]) < 1e-12);
            }
            ++checked;
        }
    }
    CHECK(checked > 50);
}
