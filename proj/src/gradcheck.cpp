#include "voxelfield/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "voxelfield/trainer.hpp"

namespace voxelfield {

double GradcheckReport::max_rel_error() const {
    double m = 0.0;
    for (const auto& g : groups) m = std::max(m, g.max_rel_error);
    return m;
}

GradcheckReport gradcheck(const VoxelWorld& world, const Model& model_in, const CameraPose& camera,
                          const Config& config_in, const LabelScheme& scheme, const GradcheckSettings& settings) {
    Config config = config_in;
    config.d_max = settings.d_max;
    config.train_samples = settings.samples;
    Model model = model_in;

    std::mt19937_64 rng(settings.seed);
    const StyleCode z = sample_style_code(model.config.style_dim, rng());
    const std::uint64_t frame_seed = rng();
    const Matrix target = oracle_render(world, camera, config.oracle, scheme);

    const StepResult base = forward_backward(world, model, camera, z, target, config, frame_seed);
    const std::uint64_t base_signature = evaluate_loss(world, model, camera, z, target, config, frame_seed).branch_signature;

    const auto refs = parameter_refs(model);
    GradcheckReport report;
    for (const std::string& group : group_names(model)) {
        // Every entry of the group as (tensor, flat index).
        std::vector<std::pair<std::size_t, Eigen::Index>> entries;
        for (std::size_t r = 0; r < refs.size(); ++r) {
            if (refs[r].group != group) continue;
            for (Eigen::Index i = 0; i < refs[r].value->size(); ++i) entries.emplace_back(r, i);
        }
        auto grad_of = [&](const std::pair<std::size_t, Eigen::Index>& e) {
            return base.grads[e.first].data()[e.second];
        };
        std::stable_sort(entries.begin(), entries.end(),
                         [&](const auto& a, const auto& b) { return std::abs(grad_of(a)) > std::abs(grad_of(b)); });
        const std::size_t n_top = std::min<std::size_t>(entries.size(), static_cast<std::size_t>(settings.per_group / 2));
        std::vector<std::pair<std::size_t, Eigen::Index>> chosen(entries.begin(), entries.begin() + n_top);
        std::vector<std::pair<std::size_t, Eigen::Index>> rest(entries.begin() + n_top, entries.end());
        std::shuffle(rest.begin(), rest.end(), rng);
        const std::size_t n_rand = std::min(rest.size(), static_cast<std::size_t>(settings.per_group) - n_top);
        chosen.insert(chosen.end(), rest.begin(), rest.begin() + n_rand);

        GroupCheck check;
        check.group = group;
        for (const auto& e : chosen) {
            double& p = refs[e.first].value->data()[e.second];
            const double saved = p;
            p = saved + settings.step;
            const LossProbe plus = evaluate_loss(world, model, camera, z, target, config, frame_seed);
            p = saved - settings.step;
            const LossProbe minus = evaluate_loss(world, model, camera, z, target, config, frame_seed);
            p = saved;
            if (plus.branch_signature != base_signature || minus.branch_signature != base_signature) {
                ++check.skipped;
                continue;
            }
            const double fd = (plus.loss.total - minus.loss.total) / (2.0 * settings.step);
            const double analytic = grad_of(e);
            const double abs_err = std::abs(analytic - fd);
            const double rel = abs_err / std::max({std::abs(analytic), std::abs(fd), settings.rel_floor});
            check.max_abs_error = std::max(check.max_abs_error, abs_err);
            check.max_rel_error = std::max(check.max_rel_error, rel);
            ++check.checked;
        }
        report.groups.push_back(check);
    }
    return report;
}

CameraPose gradcheck_camera(const VoxelWorld& world) {
    if (world.empty()) throw std::invalid_argument("gradcheck needs a non-empty world");
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& [c, label] : world.sorted_voxels()) {
        lo = Vec3{std::min(lo.x, double(c.x)), std::min(lo.y, double(c.y)), std::min(lo.z, double(c.z))};
        hi = Vec3{std::max(hi.x, c.x + 1.0), std::max(hi.y, c.y + 1.0), std::max(hi.z, c.z + 1.0)};
    }
    const Vec3 center = (lo + hi) * 0.5;
    const double extent = std::max(hi.y - lo.y, hi.z - lo.z);
    CameraPose c;
    c.look_at = center;
    c.eye = Vec3{lo.x - 1.6 * extent, center.y + 0.05, center.z - 0.05};
    c.fov_y = 0.9;
    c.width = 4;
    c.height = 4;
    return c;
}

} // namespace voxelfield
