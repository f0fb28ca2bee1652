#include "voxelfield/reference_march.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace voxelfield::reference {

namespace {

VoxelCoord cell_of(Vec3 p) {
    return {static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y)),
            static_cast<int>(std::floor(p.z))};
}

// Generous bound on where the ray can still be inside the grid box.
double march_length(const VoxelWorld& world, const Ray& ray) {
    const auto d = world.dims();
    const Vec3 center{d[0] * 0.5, d[1] * 0.5, d[2] * 0.5};
    const double diag = std::sqrt(double(d[0]) * d[0] + double(d[1]) * d[1] + double(d[2]) * d[2]);
    return norm(ray.origin - center) + diag;
}

std::optional<VoxelCoord> probe(const VoxelWorld& world, const Ray& ray, double t) {
    const VoxelCoord c = cell_of(ray.at(t));
    if (world.occupied(c)) return c;
    return std::nullopt;
}

} // namespace

std::vector<Interval> march_intervals(const VoxelWorld& world, const Ray& ray, double step) {
    std::vector<Interval> out;
    const double length = march_length(world, ray);
    bool inside = false;
    double begin = 0.0;
    double prev_t = 0.0;
    for (std::size_t k = 0;; ++k) {
        const double t = (static_cast<double>(k) + 0.5) * step;
        if (t > length) break;
        const bool occ = probe(world, ray, t).has_value();
        if (occ && !inside) begin = k == 0 ? 0.0 : 0.5 * (prev_t + t);
        if (!occ && inside) out.push_back({begin, 0.5 * (prev_t + t)});
        inside = occ;
        prev_t = t;
    }
    if (inside) out.push_back({begin, prev_t});
    return out;
}

std::vector<Interval> merge_segments(const SegmentList& list, double gap) {
    std::vector<Interval> out;
    for (const auto& s : list.segments) {
        if (!out.empty() && s.t_enter - out.back().t_end <= gap) {
            out.back().t_end = std::max(out.back().t_end, s.t_exit);
        } else {
            out.push_back({s.t_enter, s.t_exit});
        }
    }
    return out;
}

Comparison compare_with_march(const VoxelWorld& world, const Ray& ray, const SegmentList& list,
                              double step, double boundary_tol, double guard) {
    Comparison result;
    const auto& segs = list.segments;
    const double length = march_length(world, ray);

    std::vector<double> oracle_boundaries;
    bool prev_occ = false;
    double prev_t = 0.0;
    std::size_t cursor = 0;
    for (std::size_t k = 0;; ++k) {
        const double t = (static_cast<double>(k) + 0.5) * step;
        if (t > length) break;
        const auto cell = probe(world, ray, t);
        const bool occ = cell.has_value();
        if (k == 0 && occ) oracle_boundaries.push_back(0.0);
        if (k > 0 && occ != prev_occ) oracle_boundaries.push_back(0.5 * (prev_t + t));
        prev_occ = occ;
        prev_t = t;

        while (cursor < segs.size() && segs[cursor].t_exit < t) ++cursor;
        bool near_boundary = false;
        for (std::size_t j = cursor > 0 ? cursor - 1 : 0; j < std::min(segs.size(), cursor + 2); ++j) {
            if (std::abs(t - segs[j].t_enter) < guard || std::abs(t - segs[j].t_exit) < guard) {
                near_boundary = true;
            }
        }
        if (near_boundary) continue;
        ++result.probes;

        std::optional<VoxelCoord> traversed;
        for (std::size_t j = cursor; j < segs.size() && segs[j].t_enter <= t; ++j) {
            if (t >= segs[j].t_enter && t < segs[j].t_exit) {
                traversed = segs[j].voxel;
                break;
            }
        }
        if (traversed != cell) ++result.membership_mismatches;
    }

    // Pieces narrower than two probe spacings are below the march's resolution.
    const auto merged = merge_segments(list);
    const double min_piece = 2.0 * step;
    for (std::size_t i = 0; i < merged.size(); ++i) {
        const double len = merged[i].t_end - merged[i].t_begin;
        const double gap_before = i == 0 ? merged[i].t_begin : merged[i].t_begin - merged[i - 1].t_end;
        const double gap_after =
            i + 1 < merged.size() ? merged[i + 1].t_begin - merged[i].t_end : std::numeric_limits<double>::infinity();
        const double ends[2] = {merged[i].t_begin, merged[i].t_end};
        const bool resolvable[2] = {len >= min_piece && (gap_before >= min_piece || merged[i].t_begin == 0.0),
                                    len >= min_piece && gap_after >= min_piece};
        for (int e = 0; e < 2; ++e) {
            if (!resolvable[e]) continue;
            double best = std::numeric_limits<double>::infinity();
            for (double b : oracle_boundaries) best = std::min(best, std::abs(b - ends[e]));
            // The traversal stops at the grid box; the march sees the same exit as a boundary
            // only if the cell beyond is empty, which it always is outside the grid.
            if (best > boundary_tol) ++result.unmatched_boundaries;
            else result.max_boundary_error = std::max(result.max_boundary_error, best);
        }
    }
    return result;
}

} // namespace voxelfield::reference
