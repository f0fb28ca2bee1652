#include "voxelfield/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "voxelfield/config.hpp"
#include "voxelfield/fixtures.hpp"
#include "voxelfield/gradcheck.hpp"
#include "voxelfield/image_io.hpp"
#include "voxelfield/parallel.hpp"
#include "voxelfield/reference_march.hpp"
#include "voxelfield/trainer.hpp"

namespace voxelfield {

namespace {

Vec3 parse_vec3(const std::string& text, const char* flag) {
    Vec3 v;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> v.x >> c1 >> v.y >> c2 >> v.z) || c1 != ',' || c2 != ',' || !in.eof()) {
        throw CLI::ValidationError(flag, "expected x,y,z but got '" + text + "'");
    }
    return v;
}

std::pair<int, int> parse_resolution(const std::string& text) {
    int w = 0, h = 0;
    char x = 0;
    std::istringstream in(text);
    if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || !in.eof() || w < 1 || h < 1) {
        throw CLI::ValidationError("--res", "expected WIDTHxHEIGHT but got '" + text + "'");
    }
    return {w, h};
}

struct Common {
    std::string mapping_file;
    std::string palette_file;
    std::string config_file;

    LabelScheme scheme() const {
        LabelScheme s;
        if (!mapping_file.empty()) s.load_mapping_file(mapping_file);
        if (!palette_file.empty()) s.load_palette_file(palette_file);
        return s;
    }
    Config config() const { return config_file.empty() ? Config{} : load_config(config_file); }
};

void add_scheme_options(CLI::App* cmd, Common& common) {
    cmd->add_option("--labels", common.mapping_file, "Extra raw-name to class mapping file")->check(CLI::ExistingFile);
    cmd->add_option("--palette", common.palette_file, "Per-class albedo file")->check(CLI::ExistingFile);
}

std::string percent(double ratio) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * ratio << '%';
    return s.str();
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sparse-voxel neural renderer: preprocessing, rendering, training and checks", "voxelfield"};
    app.require_subcommand(1);
    Common common;

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "Keep only the outer shell of a world");
    std::string pre_in, pre_out;
    int thickness = -1;
    pre->add_option("input", pre_in, "Input world (.gvox)")->required()->check(CLI::ExistingFile);
    pre->add_option("output", pre_out, "Output world (.gvox)")->required();
    pre->add_option("--thickness", thickness, "Shell thickness in voxels (default from config)");
    pre->add_option("--config", common.config_file, "key=value configuration")->check(CLI::ExistingFile);
    add_scheme_options(pre, common);

    // render
    auto* ren = app.add_subcommand("render", "Render a trained model");
    std::string ren_world, ren_ckpt, eye_text, lookat_text, res_text = "64x64";
    std::string out_rgb = "render_rgb.png", out_depth = "render_depth.png", out_seg = "render_seg.png";
    double fov_deg = 60.0;
    int samples = -1;
    std::uint64_t style_seed = 0, frame_seed = 0;
    bool no_refiner = false;
    ren->add_option("world", ren_world, "World (.gvox)")->required()->check(CLI::ExistingFile);
    ren->add_option("checkpoint", ren_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
    ren->add_option("--eye", eye_text, "Camera position x,y,z")->required();
    ren->add_option("--lookat", lookat_text, "Camera target x,y,z")->required();
    ren->add_option("--fov", fov_deg, "Vertical field of view in degrees")->check(CLI::Range(1.0, 179.0));
    ren->add_option("--res", res_text, "Resolution WIDTHxHEIGHT");
    ren->add_option("--samples", samples, "Samples per ray (default: eval_samples from config)");
    ren->add_option("--style-seed", style_seed, "Seed of the style code");
    ren->add_option("--frame-seed", frame_seed, "Seed of the sample jitter");
    ren->add_flag("--no-refiner", no_refiner, "Map the first three feature channels to RGB directly");
    ren->add_option("--out-rgb", out_rgb, "RGB output PNG");
    ren->add_option("--out-depth", out_depth, "16-bit depth output PNG");
    ren->add_option("--out-seg", out_seg, "Paletted segmentation output PNG");
    ren->add_option("--config", common.config_file, "key=value configuration")->check(CLI::ExistingFile);
    add_scheme_options(ren, common);

    // project
    auto* proj = app.add_subcommand("project", "Project voxel labels into a camera");
    std::string proj_world, proj_eye, proj_lookat, proj_res = "64x64";
    std::string proj_seg = "project_seg.png", proj_depth = "project_depth.png";
    double proj_fov = 60.0;
    proj->add_option("world", proj_world, "World (.gvox)")->required()->check(CLI::ExistingFile);
    proj->add_option("--eye", proj_eye, "Camera position x,y,z")->required();
    proj->add_option("--lookat", proj_lookat, "Camera target x,y,z")->required();
    proj->add_option("--fov", proj_fov, "Vertical field of view in degrees")->check(CLI::Range(1.0, 179.0));
    proj->add_option("--res", proj_res, "Resolution WIDTHxHEIGHT");
    proj->add_option("--out-seg", proj_seg, "Paletted segmentation output PNG");
    proj->add_option("--out-depth", proj_depth, "16-bit depth output PNG");
    add_scheme_options(proj, common);

    // train
    auto* tr = app.add_subcommand("train", "Fit a model to target renders of a world");
    std::string tr_world, tr_out = "checkpoints", tr_metrics, tr_init;
    int tr_iters = -1;
    tr->add_option("world", tr_world, "World (.gvox)")->required()->check(CLI::ExistingFile);
    tr->add_option("--config", common.config_file, "key=value configuration")->check(CLI::ExistingFile);
    tr->add_option("--out", tr_out, "Checkpoint directory");
    tr->add_option("--metrics", tr_metrics, "Metrics log (one key=value record per iteration); default stdout");
    tr->add_option("--iterations", tr_iters, "Override the configured iteration count");
    tr->add_option("--init", tr_init, "Resume from a checkpoint")->check(CLI::ExistingFile);
    add_scheme_options(tr, common);

    // bench
    auto* bench = app.add_subcommand("bench", "Benchmarks");
    bench->require_subcommand(1);
    auto* bench_trav = bench->add_subcommand("traverse", "Traversal throughput and dense-march agreement");
    std::string bench_world;
    int bench_rays = 10000;
    std::uint64_t bench_seed = 1;
    bench_trav->add_option("--world", bench_world, "World (.gvox); default: procedural terrain")
        ->check(CLI::ExistingFile);
    bench_trav->add_option("--rays", bench_rays, "Number of random rays")->check(CLI::PositiveNumber);
    bench_trav->add_option("--seed", bench_seed, "Ray seed");
    add_scheme_options(bench_trav, common);
    auto* bench_render = bench->add_subcommand("render", "Frame render time at evaluation settings");
    std::string bench_res = "64x64";
    bench_render->add_option("--res", bench_res, "Resolution WIDTHxHEIGHT");
    bench_render->add_option("--config", common.config_file, "key=value configuration")->check(CLI::ExistingFile);

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full training gradient");
    std::string gc_world;
    double gc_tol = 1e-4;
    GradcheckSettings gc_settings;
    gc->add_option("--world", gc_world, "World (.gvox); default: two adjacent voxels")->check(CLI::ExistingFile);
    gc->add_option("--per-group", gc_settings.per_group, "Entries checked per group")->check(CLI::PositiveNumber);
    gc->add_option("--tolerance", gc_tol, "Failure threshold on the relative error");
    gc->add_option("--seed", gc_settings.seed, "Seed for the style code, jitter and entry choice");
    gc->add_option("--config", common.config_file, "key=value configuration")->check(CLI::ExistingFile);
    add_scheme_options(gc, common);

    // fixture
    auto* fix = app.add_subcommand("fixture", "Write a procedural world");
    std::string fix_kind, fix_out;
    std::uint64_t fix_seed = 7;
    fix->add_option("kind", fix_kind, "terrain | training | two-voxel")
        ->required()
        ->check(CLI::IsMember({"terrain", "training", "two-voxel"}));
    fix->add_option("output", fix_out, "Output world (.gvox)")->required();
    fix->add_option("--seed", fix_seed, "Terrain seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (pre->parsed()) {
            const Config config = common.config();
            const LabelScheme scheme = common.scheme();
            const VoxelWorld world = load_world(pre_in, scheme);
            const VoxelWorld shell = shell_extract(world, thickness > 0 ? thickness : config.shell_thickness);
            save_world(pre_out, shell);
            out << "voxels " << world.size() << " -> " << shell.size() << ", occupancy "
                << percent(world.occupancy_ratio()) << " -> " << percent(shell.occupancy_ratio()) << '\n';
        } else if (ren->parsed()) {
            const Config config = common.config();
            const LabelScheme scheme = common.scheme();
            const VoxelWorld world = load_world(ren_world, scheme);
            const Model model = load_checkpoint(ren_ckpt);
            const auto [w, h] = parse_resolution(res_text);
            CameraPose camera;
            camera.eye = parse_vec3(eye_text, "--eye");
            camera.look_at = parse_vec3(lookat_text, "--lookat");
            camera.fov_y = fov_deg * std::numbers::pi / 180.0;
            camera.width = w;
            camera.height = h;
            RenderSettings settings;
            settings.samples = samples > 0 ? samples : config.eval_samples;
            settings.d_max = config.d_max;
            settings.clip_lo = config.clip_lo;
            settings.clip_hi = config.clip_hi;
            settings.frame_seed = frame_seed;
            settings.threads = resolve_threads(config.threads);
            settings.use_refiner = !no_refiner && config.use_refiner;
            const auto start = std::chrono::steady_clock::now();
            const FrameBuffers frames =
                render_frame(world, model, camera, sample_style_code(model.config.style_dim, style_seed), settings);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            write_png_rgb(out_rgb, w, h, frames.rgb);
            write_png_depth(out_depth, w, h, frames.depth, config.d_max * 4.0);
            write_png_labels(out_seg, w, h, frames.seg, scheme);
            out << "rendered " << w << 'x' << h << " in " << secs << " s -> " << out_rgb << ", " << out_depth << ", "
                << out_seg << '\n';
        } else if (proj->parsed()) {
            const LabelScheme scheme = common.scheme();
            const VoxelWorld world = load_world(proj_world, scheme);
            const auto [w, h] = parse_resolution(proj_res);
            CameraPose camera;
            camera.eye = parse_vec3(proj_eye, "--eye");
            camera.look_at = parse_vec3(proj_lookat, "--lookat");
            camera.fov_y = proj_fov * std::numbers::pi / 180.0;
            camera.width = w;
            camera.height = h;
            const LabelProjection p = project_labels(world, camera);
            const CameraCheck check = check_camera(p, CameraSampling{});
            write_png_labels(proj_seg, w, h, p.seg, scheme);
            write_png_depth(proj_depth, w, h, p.depth, Config{}.d_max * 4.0);
            out << "mean_depth=" << check.mean_depth << " entropy=" << check.entropy
                << " accepted=" << (check.accepted ? "true" : "false") << '\n';
        } else if (tr->parsed()) {
            Config config = common.config();
            if (tr_iters >= 0) config.iterations = tr_iters;
            const LabelScheme scheme = common.scheme();
            const VoxelWorld world = load_world(tr_world, scheme);
            std::ofstream metrics_file;
            std::ostream* metrics = &out;
            if (!tr_metrics.empty()) {
                metrics_file.open(tr_metrics);
                if (!metrics_file) throw std::runtime_error("cannot write " + tr_metrics);
                metrics = &metrics_file;
            }
            TrainHooks hooks;
            hooks.checkpoint_dir = tr_out;
            hooks.on_iteration = [&](const IterationMetrics& m) { *metrics << format_metrics(m) << '\n' << std::flush; };
            std::optional<Model> initial;
            if (!tr_init.empty()) initial = load_checkpoint(tr_init);
            const TrainResult result = train(world, config, scheme, hooks, std::move(initial));
            if (!result.history.empty()) {
                out << "final loss " << result.history.back().loss.total << " after " << result.history.size()
                    << " iterations; checkpoint " << (std::filesystem::path(tr_out) / "latest.vfck").string() << '\n';
            }
        } else if (bench_trav->parsed()) {
            const LabelScheme scheme = common.scheme();
            const VoxelWorld world = bench_world.empty() ? fixtures::terrain().world : load_world(bench_world, scheme);
            std::mt19937_64 rng(bench_seed);
            const auto dims = world.dims();
            std::vector<Ray> rays;
            rays.reserve(static_cast<std::size_t>(bench_rays));
            std::normal_distribution<double> normal;
            for (int i = 0; i < bench_rays; ++i) {
                const Vec3 o{uniform01(rng) * dims[0], uniform01(rng) * dims[1], uniform01(rng) * dims[2]};
                rays.push_back(make_ray(o, Vec3{normal(rng), normal(rng), normal(rng)}));
            }
            std::size_t segments = 0;
            const auto start = std::chrono::steady_clock::now();
            for (const Ray& r : rays) segments += traverse(world, r).segments.size();
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::size_t mismatches = 0, boundary_misses = 0;
            double worst = 0.0;
            for (const Ray& r : rays) {
                const auto cmp = reference::compare_with_march(world, r, traverse(world, r));
                mismatches += cmp.membership_mismatches;
                boundary_misses += cmp.unmatched_boundaries;
                worst = std::max(worst, cmp.max_boundary_error);
            }
            out << "rays=" << rays.size() << " segments=" << segments << " seconds=" << secs
                << " rays_per_second=" << (secs > 0 ? rays.size() / secs : 0.0) << " membership_mismatches=" << mismatches
                << " unmatched_boundaries=" << boundary_misses << " max_boundary_error=" << worst << '\n';
            return mismatches == 0 && boundary_misses == 0 ? 0 : 1;
        } else if (bench_render->parsed()) {
            const Config config = common.config();
            const auto [w, h] = parse_resolution(bench_res);
            const VoxelWorld world = fixtures::training_world();
            const Model model = init_model(world, config.model, config.seed);
            CameraPose camera;
            camera.eye = Vec3{-2.0, 6.0, -2.0};
            camera.look_at = Vec3{4.0, 2.0, 4.0};
            camera.width = w;
            camera.height = h;
            RenderSettings settings;
            settings.samples = config.eval_samples;
            settings.d_max = config.d_max;
            settings.threads = resolve_threads(config.threads);
            const auto start = std::chrono::steady_clock::now();
            const FrameBuffers frames = render_frame(world, model, camera, sample_style_code(model.config.style_dim, 0), settings);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            out << "pixels=" << frames.pixels() << " seconds=" << secs << " threads=" << settings.threads << '\n';
        } else if (gc->parsed()) {
            const Config config = common.config();
            const LabelScheme scheme = common.scheme();
            const VoxelWorld world = gc_world.empty() ? fixtures::two_voxel_world() : load_world(gc_world, scheme);
            const CameraPose camera = gc_world.empty() ? fixtures::two_voxel_camera() : gradcheck_camera(world);
            const Model model = init_model(world, config.model, config.seed);
            const GradcheckReport report = gradcheck(world, model, camera, config, scheme, gc_settings);
            bool ok = true;
            for (const GroupCheck& g : report.groups) {
                out << "group=" << g.group << " checked=" << g.checked << " skipped=" << g.skipped
                    << " max_rel_error=" << g.max_rel_error << '\n';
                ok = ok && g.max_rel_error < gc_tol && g.checked > 0;
            }
            out << (ok ? "gradcheck passed" : "gradcheck FAILED") << '\n';
            return ok ? 0 : 1;
        } else if (fix->parsed()) {
            VoxelWorld world = fix_kind == "terrain"    ? fixtures::terrain(32, 16, 32, fix_seed).world
                               : fix_kind == "training" ? fixtures::training_world()
                                                        : fixtures::two_voxel_world();
            save_world(fix_out, world);
            out << "wrote " << world.size() << " voxels to " << fix_out << '\n';
        }
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace voxelfield
