#include "voxelfield/traversal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace voxelfield {

Ray make_ray(Vec3 origin, Vec3 direction) {
    const double n = norm(direction);
    if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("ray direction must be nonzero");
    return Ray{origin, direction * (1.0 / n)};
}

double SegmentList::total_length() const {
    double sum = 0.0;
    for (const auto& s : segments) sum += s.length();
    return sum;
}

SegmentList traverse(const VoxelWorld& world, const Ray& ray) {
    SegmentList out;
    if (world.empty()) return out;

    const auto dims = world.dims();
    constexpr double kInf = std::numeric_limits<double>::infinity();

    // Clip against the grid box.
    double t_near = 0.0;
    double t_far = kInf;
    int near_axis = -1;
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a];
        const double d = ray.direction[a];
        if (d == 0.0) {
            if (o < 0.0 || o >= dims[a]) return out;
            continue;
        }
        double t0 = (0.0 - o) / d;
        double t1 = (dims[a] - o) / d;
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > t_near) {
            t_near = t0;
            near_axis = a;
        }
        t_far = std::min(t_far, t1);
    }
    if (!(t_near < t_far)) return out;

    int idx[3];
    int step[3];
    const Vec3 start = ray.at(t_near);
    for (int a = 0; a < 3; ++a) {
        const double d = ray.direction[a];
        if (a == near_axis) {
            idx[a] = d > 0.0 ? 0 : dims[a] - 1;
        } else {
            idx[a] = std::clamp(static_cast<int>(std::floor(start[a])), 0, dims[a] - 1);
        }
        step[a] = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    }

    // Boundary crossings are computed from the origin each step rather than accumulated.
    auto next_crossing = [&](int a) {
        if (step[a] == 0) return kInf;
        const double boundary = step[a] > 0 ? idx[a] + 1.0 : static_cast<double>(idx[a]);
        return (boundary - ray.origin[a]) / ray.direction[a];
    };

    double t_cur = t_near;
    int entry_axis = near_axis;
    while (t_cur < t_far) {
        int axis = 0;
        double t_next = next_crossing(0);
        for (int a = 1; a < 3; ++a) {
            const double t = next_crossing(a);
            if (t < t_next) {
                t_next = t;
                axis = a;
            }
        }
        t_next = std::min(t_next, t_far);

        const VoxelCoord cell{idx[0], idx[1], idx[2]};
        if (t_next > t_cur) {
            if (const LabelId* label = world.find(cell)) {
                out.segments.push_back(Segment{t_cur, t_next, cell, *label, entry_axis});
            }
        }

        idx[axis] += step[axis];
        if (idx[axis] < 0 || idx[axis] >= dims[axis]) break;
        t_cur = std::max(t_cur, t_next);
        entry_axis = axis;
    }
    return out;
}

SegmentList truncate(SegmentList list, double d_max) {
    if (!(d_max > 0.0)) throw std::invalid_argument("truncation distance must be positive");
    double travelled = 0.0;
    for (std::size_t i = 0; i < list.segments.size(); ++i) {
        Segment& s = list.segments[i];
        const double len = s.length();
        if (travelled + len > d_max) {
            const double keep = d_max - travelled;
            list.truncated = true;
            if (keep > 0.0) {
                s.t_exit = s.t_enter + keep;
                list.t_max = s.t_exit;
                list.segments.resize(i + 1);
            } else {
                list.t_max = s.t_enter;
                list.segments.resize(i);
            }
            return list;
        }
        travelled += len;
    }
    return list;
}

SampleSet stratified_sample(const Ray& ray, const SegmentList& list, std::span<const double> jitter) {
    SampleSet out;
    const std::size_t n = jitter.size();
    if (list.segments.empty() || n == 0) return out;

    const double total = list.total_length();
    if (!(total > 0.0)) return out;
    const double width = total / static_cast<double>(n);
    out.reserve(n);

    std::size_t seg = 0;
    double seg_start = 0.0; // cumulative arclength at the start of segment `seg`
    for (std::size_t k = 0; k < n; ++k) {
        const double s = (static_cast<double>(k) + jitter[k]) * width;
        while (seg + 1 < list.segments.size() && s >= seg_start + list.segments[seg].length()) {
            seg_start += list.segments[seg].length();
            ++seg;
        }
        const Segment& cur = list.segments[seg];
        const double t = std::clamp(cur.t_enter + (s - seg_start), cur.t_enter, cur.t_exit);
        out.push_back(Sample{ray.at(t), t, width, cur.voxel, cur.label});
    }
    return out;
}

SampleSet stratified_sample(const Ray& ray, const SegmentList& list, int n, std::mt19937_64& rng) {
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    if (list.segments.empty()) return {};
    std::vector<double> jitter(static_cast<std::size_t>(n));
    for (double& u : jitter) u = uniform01(rng);
    return stratified_sample(ray, list, jitter);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace

std::mt19937_64 pixel_rng(std::uint64_t frame_seed, std::uint64_t pixel_index) {
    return std::mt19937_64(splitmix64(splitmix64(frame_seed) ^ (pixel_index * 0xD1B54A32D192ED03ull)));
}

} // namespace voxelfield
