#include "sdfrecon/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sdfrecon/adam.hpp"
#include "sdfrecon/losses.hpp"
#include "sdfrecon/renderer.hpp"

namespace sdfrecon {

namespace {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// One Adam state per parameter tensor; rebuilt from scratch at each LOD (the
// tensors change shape when the grid subdivides).
struct Optimizer {
    std::vector<AdamState> raw_sdf, plane_x, plane_y, plane_z, probes;
    AdamState w1, b1, w2, b2, w3, b3, camera_bias;

    Optimizer(const SparseGrid& g, const DecoderMlp& m) {
        raw_sdf.assign(g.tiles.size(), AdamState(kTileVoxels));
        const size_t plane_sz = static_cast<size_t>(kTileEdge) * kTileEdge * g.n_s;
        plane_x.assign(g.tiles.size(), AdamState(plane_sz));
        plane_y.assign(g.tiles.size(), AdamState(plane_sz));
        plane_z.assign(g.tiles.size(), AdamState(plane_sz));
        const size_t probe_sz = static_cast<size_t>(g.sh_order) * g.sh_order * g.n_a;
        probes.assign(g.probes.size(), AdamState(probe_sz));
        w1.resize(m.w1.size());
        b1.resize(m.b1.size());
        w2.resize(m.w2.size());
        b2.resize(m.b2.size());
        w3.resize(m.w3.size());
        b3.resize(m.b3.size());
        camera_bias.resize(m.camera_bias.size());
    }

    void step(SparseGrid& g, DecoderMlp& m, const GradBuffers& gb, double lr_vox, double lr_mlp) {
        for (size_t t = 0; t < g.tiles.size(); ++t) {
            raw_sdf[t].step(g.tiles[t].raw_sdf.data(), gb.raw_sdf[t].data(), lr_vox);
            plane_x[t].step(g.tiles[t].plane_x.data(), gb.plane_x[t].data(), lr_vox);
            plane_y[t].step(g.tiles[t].plane_y.data(), gb.plane_y[t].data(), lr_vox);
            plane_z[t].step(g.tiles[t].plane_z.data(), gb.plane_z[t].data(), lr_vox);
        }
        for (size_t p = 0; p < g.probes.size(); ++p)
            probes[p].step(g.probes[p].coeffs.data(), gb.probes[p].data(), lr_mlp);
        w1.step(m.w1.data(), gb.mlp.w1.data(), lr_mlp);
        b1.step(m.b1.data(), gb.mlp.b1.data(), lr_mlp);
        w2.step(m.w2.data(), gb.mlp.w2.data(), lr_mlp);
        b2.step(m.b2.data(), gb.mlp.b2.data(), lr_mlp);
        w3.step(m.w3.data(), gb.mlp.w3.data(), lr_mlp);
        b3.step(m.b3.data(), gb.mlp.b3.data(), lr_mlp);
        if (!m.camera_bias.empty())
            camera_bias.step(m.camera_bias.data(), gb.mlp.camera_bias.data(), lr_mlp);
    }
};

struct BatchView {
    Camera camera;
    ImageRGB image;
    ImageGray mask;
};

} // namespace

TrainStats train(const Dataset& ds, const TrainSchedule& sched, Checkpoint& ckpt,
                 std::ostream* log) {
    if (ds.views.empty()) throw std::runtime_error("train: empty dataset");
    if (ckpt.lod_cursor < 0 || ckpt.lod_cursor >= static_cast<int>(sched.lods.size()))
        throw std::runtime_error("train: checkpoint LOD cursor outside the schedule");
    if (ckpt.grid.sh_order > sched.lods[ckpt.lod_cursor].sh_order)
        throw std::runtime_error("train: grid SH order exceeds the schedule's");

    SparseGrid& grid = ckpt.grid;
    DecoderMlp& mlp = ckpt.mlp;
    if (sched.camera_bias && mlp.camera_bias.empty())
        mlp.camera_bias.assign(ds.views.size() * kHidden, 0.0);
    if (sched.camera_bias)
        for (const DatasetView& v : ds.views)
            if (v.camera.id < 0 || v.camera.id >= mlp.num_cameras())
                throw std::runtime_error("train: camera id outside the bias table");

    std::mt19937_64 rng(ckpt.seed);
    TrainStats stats;
    long global_step = 0;
    const int n_threads = max_threads();

    for (; ckpt.lod_cursor < static_cast<int>(sched.lods.size()); ++ckpt.lod_cursor) {
        const LodSchedule& lodsched = sched.lods[ckpt.lod_cursor];
        if (grid.sh_order < lodsched.sh_order) grid.raise_sh_order(lodsched.sh_order);

        // Per-LOD working copies of the dataset at the scheduled resolution.
        std::vector<BatchView> views(ds.views.size());
        for (size_t i = 0; i < ds.views.size(); ++i) {
            views[i].camera = ds.views[i].camera.downscaled(lodsched.image_divisor);
            views[i].image = downscale(ds.views[i].image, lodsched.image_divisor);
            views[i].mask = downscale_mask(ds.views[i].mask, lodsched.image_divisor);
        }

        Optimizer opt(grid, mlp);
        std::vector<GradBuffers> gbs(n_threads);
        for (GradBuffers& gb : gbs) gb.init(grid, mlp);

        std::vector<int> order(views.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        size_t order_pos = 0;

        const int total = lodsched.iterations;
        for (int it = static_cast<int>(ckpt.iteration); it < total; ++it) {
            const double lr_vox = lodsched.lr_voxels.at(it, total) * warmup_scale(it);
            const double lr_mlp = lodsched.lr_mlp.at(it, total) * warmup_scale(it);
            const double l_sdf = lodsched.lambda_sdf.at(it, total);
            const double l_eik = lodsched.lambda_eik.at(it, total);
            const double l_norm = lodsched.lambda_normal.at(it, total);
            const double l_feat = lodsched.lambda_features.at(it, total);
            const double l_probe = lodsched.lambda_probes.at(it, total);
            const double tau = lodsched.tau.at_geometric(it, total) / grid.voxel_size;
            const double photo_scale = sched.lambda_photo / lodsched.images_per_batch;

            for (GradBuffers& gb : gbs) gb.clear();

            std::vector<int> batch(lodsched.images_per_batch);
            for (int& b : batch) {
                if (order_pos == order.size()) {
                    std::shuffle(order.begin(), order.end(), rng);
                    order_pos = 0;
                }
                b = order[order_pos++];
            }

            double photo_plain = 0.0, sq_err = 0.0;
            long mask_px = 0;
            for (int vi : batch) {
                const BatchView& view = views[vi];
                RenderOptions ropt;
                ropt.tau = tau;
                ropt.camera_id = sched.camera_bias ? view.camera.id : -1;
                const int w = view.camera.width, h = view.camera.height;

#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : photo_plain, sq_err, mask_px)
#endif
                for (int px = 0; px < w * h; ++px) {
                    const int u = px % w, v = px / w;
#ifdef _OPENMP
                    GradBuffers& gb = gbs[omp_get_thread_num()];
#else
                    GradBuffers& gb = gbs[0];
#endif
                    const bool in_mask = view.mask.at(u, v) > 0.5;
                    RenderOptions popt = ropt;
                    popt.need_colors = in_mask;
                    thread_local RayWorkspace ws;
                    RayResult rr = render_ray(grid, mlp, view.camera.pos,
                                              view.camera.pixel_dir(u + 0.5, v + 0.5), popt, ws);
                    PhotoPixel pp = photo_pixel(rr.color, view.image.pixel(u, v), in_mask,
                                                rr.acc_alpha, photo_scale);
                    photo_plain += pp.plain;
                    if (in_mask) {
                        sq_err += (rr.color - view.image.pixel(u, v)).norm2();
                        mask_px += 3;
                    }
                    if (pp.d_color.norm2() > 0.0 || pp.d_alpha != 0.0)
                        render_ray_backward(grid, mlp, popt, ws, pp.d_color, pp.d_alpha, gb);
                }
            }

            GradBuffers& gb = gbs[0];
            for (int t = 1; t < n_threads; ++t) gb.add(gbs[t]);

            const LossResult r_sdf = loss_sdf(grid, grid, l_sdf, &gb);
            const LossResult r_eik = loss_eikonal(grid, grid, l_eik, &gb);
            const LossResult r_norm = loss_normal(grid, grid, l_norm, &gb);
            const LossResult r_feat = loss_features(grid, grid, l_feat, &gb);
            const LossResult r_probe = loss_probes(grid, l_probe, &gb);

            finalize_smooth_grads(grid, gb);
            opt.step(grid, mlp, gb, lr_vox, lr_mlp);
            grid.smooth_all();

            const double mse = mask_px > 0 ? sq_err / mask_px : 0.0;
            const double psnr = mse > 1e-10 ? 10.0 * std::log10(1.0 / mse) : 99.0;
            stats.final_psnr = psnr;
            ++stats.steps_run;
            if (log) {
                const double tot = photo_plain + r_sdf.plain + r_eik.plain + r_norm.plain +
                                   r_feat.plain + r_probe.plain;
                (*log) << "step " << global_step + it << " lod " << ckpt.lod_cursor << " photo "
                       << photo_plain << " sdf " << r_sdf.plain << " eik " << r_eik.plain
                       << " normal " << r_norm.plain << " features " << r_feat.plain << " probes "
                       << r_probe.plain << " total " << tot << " psnr " << psnr << '\n';
            }
        }
        global_step += total;
        ckpt.iteration = 0;

        if (ckpt.lod_cursor + 1 < static_cast<int>(sched.lods.size())) grid = grid.subdivide();
    }
    ckpt.lod_cursor = static_cast<int>(sched.lods.size()) - 1;
    ckpt.iteration = sched.lods.back().iterations;
    return stats;
}

} // namespace sdfrecon
