#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "sdfrecon/bench.hpp"
#include "sdfrecon/checkpoint.hpp"
#include "sdfrecon/dataset.hpp"
#include "sdfrecon/gradcheck.hpp"
#include "sdfrecon/mesh.hpp"
#include "sdfrecon/metrics.hpp"
#include "sdfrecon/renderer.hpp"
#include "sdfrecon/schedule.hpp"
#include "sdfrecon/synth.hpp"
#include "sdfrecon/trainer.hpp"

using namespace sdfrecon;

namespace {

void set_threads(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

AnalyticScene default_scene() {
    // Glossy sphere, two point lights.
    return AnalyticScene::from_json_text(R"({
        "primitives": [
            {"kind": "sphere", "center": [0, 0, 0], "radius": 0.3,
             "albedo": [0.55, 0.3, 0.2], "r0": 0.08, "spec_exp": 32.0}
        ],
        "lights": [
            {"kind": "point", "position": [1.5, 2.0, 1.0], "intensity": [6.0, 6.0, 5.5]},
            {"kind": "point", "position": [-1.8, 1.2, -1.4], "intensity": [3.0, 3.2, 3.6]}
        ]
    })");
}

std::vector<MaskImage> dataset_masks(const Dataset& ds) {
    std::vector<MaskImage> masks;
    for (const DatasetView& v : ds.views) {
        MaskImage m;
        m.width = v.mask.width;
        m.height = v.mask.height;
        m.data.resize(v.mask.data.size());
        for (size_t i = 0; i < m.data.size(); ++i)
            m.data[i] = v.mask.data[i] > 0.5 ? 255 : 0;
        masks.push_back(std::move(m));
    }
    return masks;
}

int run(int argc, char** argv) {
    CLI::App app{"sdfrecon: SDF + view-dependent appearance reconstruction from posed images"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    app.add_option("--seed", seed, "RNG seed (default 0)")->capture_default_str();
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP thread count (0 = library default)");

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Raytrace an analytic scene into a dataset");
    std::string synth_scene, synth_out = "dataset";
    int synth_views = 24, synth_res = 128;
    double synth_radius = 2.0;
    synth->add_option("--scene", synth_scene, "Scene JSON (omit for the built-in glossy sphere)");
    synth->add_option("--out", synth_out, "Output dataset directory")->capture_default_str();
    synth->add_option("--views", synth_views, "Number of cameras")->capture_default_str();
    synth->add_option("--res", synth_res, "Image resolution")->capture_default_str();
    synth->add_option("--radius", synth_radius, "Camera ring radius")->capture_default_str();

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "Train from a dataset and a schedule");
    std::string train_data, train_sched, train_out = "checkpoint.bin", train_log, train_resume;
    int train_res = 16, train_ns = 4, train_na = 4;
    std::string train_init = "hull";
    train_cmd->add_option("--data", train_data, "Dataset directory")->required();
    train_cmd->add_option("--schedule", train_sched, "Schedule JSON file")->required();
    train_cmd->add_option("--out", train_out, "Output checkpoint")->capture_default_str();
    train_cmd->add_option("--log", train_log, "Loss log file (default stdout)");
    train_cmd->add_option("--resume", train_resume, "Resume from a checkpoint");
    train_cmd->add_option("--res", train_res, "Initial grid resolution (voxels per axis)")
        ->capture_default_str();
    train_cmd->add_option("--ns", train_ns, "Spatial feature channels")->capture_default_str();
    train_cmd->add_option("--na", train_na, "Angular feature channels")->capture_default_str();
    train_cmd->add_option("--init", train_init, "Initialization: hull | sphere")
        ->capture_default_str();

    // ---- render ----
    auto* render_cmd = app.add_subcommand("render", "Render a checkpoint from a dataset camera");
    std::string render_ckpt, render_data, render_out = "render.png";
    int render_view = 0, render_sh = -1;
    double render_tau = 3000.0;
    bool render_no_spatial = false, render_no_fresnel = false;
    render_cmd->add_option("--ckpt", render_ckpt, "Checkpoint file")->required();
    render_cmd->add_option("--data", render_data, "Dataset directory (camera source)")->required();
    render_cmd->add_option("--view", render_view, "Camera index")->capture_default_str();
    render_cmd->add_option("--out", render_out, "Output PNG")->capture_default_str();
    render_cmd->add_option("--tau", render_tau, "Sharpness (units of 1/voxel)")
        ->capture_default_str();
    render_cmd->add_option("--sh-order", render_sh, "Truncate probes to this SH order");
    render_cmd->add_flag("--no-spatial", render_no_spatial, "Drop spatial features (F_s = 0)");
    render_cmd->add_flag("--no-fresnel", render_no_fresnel, "Drop the Fresnel input (n.v = 1)");

    // ---- mesh ----
    auto* mesh_cmd = app.add_subcommand("mesh", "Extract the zero level set");
    std::string mesh_ckpt, mesh_out = "mesh.ply";
    mesh_cmd->add_option("--ckpt", mesh_ckpt, "Checkpoint file")->required();
    mesh_cmd->add_option("--out", mesh_out, "Output mesh (.ply or .obj)")->capture_default_str();

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "PSNR / chamfer report");
    std::string eval_ckpt, eval_data, eval_gt_mesh;
    double eval_tau = 3000.0, eval_max_dist = 0.0;
    int eval_points = 100000;
    eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
    eval_cmd->add_option("--gt-mesh", eval_gt_mesh, "Ground-truth mesh (ASCII PLY)");
    eval_cmd->add_option("--tau", eval_tau, "Sharpness (units of 1/voxel)")->capture_default_str();
    eval_cmd->add_option("--max-dist", eval_max_dist,
                         "Chamfer clipping distance (0 = 10x mean GT point spacing)");
    eval_cmd->add_option("--points", eval_points, "Chamfer sample count")->capture_default_str();

    // ---- bench ----
    auto* bench_cmd = app.add_subcommand("bench", "Shading/render timings, 1 vs N threads");
    std::string bench_ckpt, bench_data;
    int bench_view = 0;
    double bench_tau = 3000.0;
    bench_cmd->add_option("--ckpt", bench_ckpt, "Checkpoint file")->required();
    bench_cmd->add_option("--data", bench_data, "Dataset directory (camera source)")->required();
    bench_cmd->add_option("--view", bench_view, "Camera index")->capture_default_str();
    bench_cmd->add_option("--tau", bench_tau, "Sharpness (units of 1/voxel)")
        ->capture_default_str();

    // ---- gradcheck ----
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
    double gc_h = 1e-4, gc_tol = 1e-4;
    int gc_samples = 100;
    gc_cmd->add_option("--fd-step", gc_h, "FD step")->capture_default_str();
    gc_cmd->add_option("--tol", gc_tol, "Relative error tolerance")->capture_default_str();
    gc_cmd->add_option("--samples", gc_samples, "Parameters sampled per class")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    set_threads(threads);

    if (*synth) {
        AnalyticScene scene =
            synth_scene.empty() ? default_scene() : AnalyticScene::load(synth_scene);
        Dataset ds = make_dataset(scene, synth_views, synth_res, synth_radius, seed);
        save_dataset(synth_out, ds);
        save_ply(synth_out + "/mesh_gt.ply", analytic_mesh(scene, 128, 0.55));
        std::cout << "wrote " << ds.views.size() << " views to " << synth_out << "\n";
        return 0;
    }

    if (*train_cmd) {
        Dataset ds = load_dataset(train_data);
        TrainSchedule sched = TrainSchedule::load(train_sched);
        Checkpoint ckpt;
        if (!train_resume.empty()) {
            ckpt = load_checkpoint(train_resume);
        } else {
            GridConfig cfg;
            if (train_res % kTileEdge != 0)
                throw std::runtime_error("train: --res must be a multiple of 16");
            cfg.resolution = {train_res, train_res, train_res};
            cfg.voxel_size = 1.0 / train_res;
            cfg.origin = {-0.5, -0.5, -0.5};
            cfg.n_s = train_ns;
            cfg.n_a = train_na;
            cfg.sh_order = sched.lods.front().sh_order;
            if (train_init == "sphere") {
                ckpt.grid = init_grid_sphere(cfg, {0, 0, 0}, 0.35);
            } else if (train_init == "hull") {
                std::vector<Camera> cams;
                for (const DatasetView& v : ds.views) cams.push_back(v.camera);
                ckpt.grid = init_grid_visual_hull(cfg, cams, dataset_masks(ds));
            } else {
                throw std::runtime_error("train: unknown --init mode: " + train_init);
            }
            ckpt.mlp = DecoderMlp::glorot_init(train_ns, train_na,
                                               sched.camera_bias
                                                   ? static_cast<int>(ds.views.size())
                                                   : 0,
                                               seed);
            ckpt.seed = seed;
        }
        std::ofstream logf;
        std::ostream* log = &std::cout;
        if (!train_log.empty()) {
            logf.open(train_log);
            if (!logf) throw std::runtime_error("train: cannot open log file " + train_log);
            log = &logf;
        }
        TrainStats stats = train(ds, sched, ckpt, log);
        save_checkpoint(train_out, ckpt);
        std::cout << "steps=" << stats.steps_run << " psnr=" << stats.final_psnr << " out="
                  << train_out << "\n";
        return 0;
    }

    if (*render_cmd) {
        Checkpoint ckpt = load_checkpoint(render_ckpt);
        Dataset ds = load_dataset(render_data);
        if (render_view < 0 || render_view >= static_cast<int>(ds.views.size()))
            throw std::runtime_error("render: --view out of range");
        RenderOptions opt;
        opt.tau = render_tau / ckpt.grid.voxel_size;
        opt.no_spatial = render_no_spatial;
        opt.no_fresnel = render_no_fresnel;
        opt.sh_order_override = render_sh;
        RenderedImage img = render_image(ckpt.grid, ckpt.mlp, ds.views[render_view].camera, opt);
        write_png_rgb(render_out, img.color);
        std::cout << "wrote " << render_out << "\n";
        return 0;
    }

    if (*mesh_cmd) {
        Checkpoint ckpt = load_checkpoint(mesh_ckpt);
        TriMesh mesh = marching_cubes(ckpt.grid);
        if (mesh_out.size() >= 4 && mesh_out.substr(mesh_out.size() - 4) == ".obj")
            save_obj(mesh_out, mesh);
        else
            save_ply(mesh_out, mesh);
        std::cout << "vertices=" << mesh.vertices.size() << " triangles="
                  << mesh.triangles.size() << " out=" << mesh_out << "\n";
        return 0;
    }

    if (*eval_cmd) {
        Checkpoint ckpt = load_checkpoint(eval_ckpt);
        Dataset ds = load_dataset(eval_data);
        RenderOptions opt;
        opt.tau = eval_tau / ckpt.grid.voxel_size;
        double psnr_sum = 0.0;
        for (const DatasetView& v : ds.views) {
            RenderedImage img = render_image(ckpt.grid, ckpt.mlp, v.camera, opt);
            psnr_sum += psnr_masked(img.color, v.image, v.mask);
        }
        std::cout << "psnr=" << psnr_sum / ds.views.size() << "\n";
        if (!eval_gt_mesh.empty()) {
            TriMesh gt = load_ply(eval_gt_mesh);
            TriMesh pred = marching_cubes(ckpt.grid);
            if (pred.empty()) throw std::runtime_error("eval: checkpoint has no zero crossing");
            auto pred_pts = sample_mesh_points(pred, eval_points, seed);
            auto gt_pts = sample_mesh_points(gt, eval_points, seed + 1);
            double max_dist = eval_max_dist;
            if (max_dist <= 0.0) {
                // Default clip: 10x the mean GT sample spacing estimate.
                double area = 0.0;
                for (const auto& t : gt.triangles) {
                    const Vec3 e1 = gt.vertices[t[1]] - gt.vertices[t[0]];
                    const Vec3 e2 = gt.vertices[t[2]] - gt.vertices[t[0]];
                    area += e1.cross(e2).norm() * 0.5;
                }
                max_dist = 10.0 * std::sqrt(area / eval_points);
            }
            ChamferResult ch = chamfer(pred_pts, pred, gt_pts, gt, max_dist);
            std::cout << "chamfer_accuracy=" << ch.accuracy << "\n"
                      << "chamfer_completeness=" << ch.completeness << "\n"
                      << "chamfer_mean=" << ch.mean << "\n";
        }
        return 0;
    }

    if (*bench_cmd) {
        Checkpoint ckpt = load_checkpoint(bench_ckpt);
        Dataset ds = load_dataset(bench_data);
        if (bench_view < 0 || bench_view >= static_cast<int>(ds.views.size()))
            throw std::runtime_error("bench: --view out of range");
        const Camera& cam = ds.views[bench_view].camera;
        const double tau = bench_tau / ckpt.grid.voxel_size;
        int n_threads = threads;
#ifdef _OPENMP
        if (n_threads <= 0) n_threads = omp_get_max_threads();
#else
        if (n_threads <= 0) n_threads = 1;
#endif
        for (int t : {1, n_threads}) {
            BenchReport rep = run_bench(ckpt.grid, ckpt.mlp, cam, tau, t);
            std::cout << "threads=" << t << " shaded_samples=" << rep.shaded_samples << "\n";
            std::cout << "mode              shading_ms  render_ms\n";
            for (const BenchRow& row : rep.rows) {
                std::cout << row.name;
                for (size_t i = row.name.size(); i < 18; ++i) std::cout << ' ';
                std::cout << row.shading_ms << "  " << row.render_ms << "\n";
            }
            if (t == n_threads) break; // avoid printing twice when n == 1
        }
        return 0;
    }

    if (*gc_cmd) {
        GradCheckReport rep = run_gradcheck(seed, gc_h, gc_tol, gc_samples);
        for (const auto& c : rep.classes)
            std::cout << "class=" << c.name << " checked=" << c.checked << " max_rel_err="
                      << c.max_rel_err << " " << (c.pass ? "PASS" : "FAIL") << "\n";
        if (!rep.pass) {
            std::cerr << "error: gradcheck failed\n";
            return 1;
        }
        std::cout << "gradcheck passed\n";
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
