#include "sdfrecon/renderer.hpp"

#include <algorithm>
#include <cmath>

namespace sdfrecon {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Intersection of a ray with an axis-aligned box; false when it misses.
bool ray_box(const Vec3& o, const Vec3& d, const Vec3& bmin, const Vec3& bmax, double& t0,
             double& t1) {
    t0 = 0.0;
    t1 = std::numeric_limits<double>::max();
    for (int a = 0; a < 3; ++a) {
        const double da = d[a], oa = o[a];
        const double mn = bmin[a], mx = bmax[a];
        if (std::abs(da) < 1e-15) {
            if (oa < mn || oa > mx) return false;
            continue;
        }
        double ta = (mn - oa) / da, tb = (mx - oa) / da;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

} // namespace

double alpha_from_sdf(double s_i, double s_next, double tau) {
    const double a = sigmoid(tau * s_i);
    const double b = sigmoid(tau * s_next);
    return std::max((a - b) / a, 0.0);
}

Vec3 composite(const std::vector<double>& alphas, const std::vector<Vec3>& colors,
               double* accumulated_alpha) {
    Vec3 c{0, 0, 0};
    double trans = 1.0, acc = 0.0;
    for (size_t i = 0; i < alphas.size(); ++i) {
        const double w = trans * alphas[i];
        c += w * colors[i];
        acc += w;
        trans *= 1.0 - alphas[i];
    }
    if (accumulated_alpha) *accumulated_alpha = acc;
    return c;
}

std::vector<double> march_ray(const SparseGrid& grid, const Vec3& origin, const Vec3& dir,
                              int n_max) {
    std::vector<double> ts;
    double t0, t1;
    if (!ray_box(origin, dir, grid.origin, grid.world_max(), t0, t1)) return ts;
    const double h = grid.voxel_size;
    const double tile_w = kTileEdge * h;
    double t = t0 + 0.5 * h;
    while (t < t1 && static_cast<int>(ts.size()) < n_max) {
        const Vec3 p = origin + t * dir;
        const Vec3 v = grid.world_to_voxel(p);
        const int tx = static_cast<int>(std::floor(v.x)) >> 4;
        const int ty = static_cast<int>(std::floor(v.y)) >> 4;
        const int tz = static_cast<int>(std::floor(v.z)) >> 4;
        if (grid.tile_index(tx, ty, tz) >= 0) {
            ts.push_back(t);
            t += h;
        } else {
            // Skip past the unallocated tile in one jump.
            const Vec3 bmin = grid.origin + Vec3(tx, ty, tz) * tile_w;
            const Vec3 bmax = bmin + Vec3(1, 1, 1) * tile_w;
            double e0, e1;
            if (ray_box(origin, dir, bmin, bmax, e0, e1) && e1 > t) {
                const double skip = std::ceil((e1 - t) / h + 1e-9);
                t += std::max(1.0, skip) * h;
            } else {
                t += h;
            }
        }
    }
    return ts;
}

Vec3 decode_fused(const SparseGrid& grid, const DecoderMlp& mlp, const Tile& tile, const Vec3& pos,
                  const Vec3& view_to_camera, const RenderOptions& opt, RaySample* cache) {
    const int order = opt.sh_order_override > 0 ? std::min(opt.sh_order_override, grid.sh_order)
                                                : grid.sh_order;
    const double h = grid.voxel_size;
    Vec3 gvec;
    gvec.x = (grid.sample_sdf(pos + Vec3(h, 0, 0)).value -
              grid.sample_sdf(pos - Vec3(h, 0, 0)).value) / (2 * h);
    gvec.y = (grid.sample_sdf(pos + Vec3(0, h, 0)).value -
              grid.sample_sdf(pos - Vec3(0, h, 0)).value) / (2 * h);
    gvec.z = (grid.sample_sdf(pos + Vec3(0, 0, h)).value -
              grid.sample_sdf(pos - Vec3(0, 0, h)).value) / (2 * h);
    const double glen = gvec.norm();
    const bool degenerate = glen < 1e-8;
    const Vec3 normal = degenerate ? Vec3{0, 0, 0} : gvec / glen;
    const Vec3 view = view_to_camera;
    Vec3 refl;
    double n_dot_v;
    if (degenerate) {
        refl = view; // zero-gradient fallback
        n_dot_v = 1.0;
    } else {
        refl = reflect_about(normal, view);
        n_dot_v = normal.dot(view);
    }

    static thread_local std::vector<double> f_s, f_a;
    f_s.assign(grid.n_s, 0.0);
    f_a.assign(grid.n_a, 0.0);
    const Vec3 local = grid.world_to_voxel(pos) -
                       Vec3(tile.coords.x, tile.coords.y, tile.coords.z) * kTileEdge;
    if (!opt.no_spatial) grid.sample_spatial_features(tile, local, f_s.data());

    if (!opt.no_angular) {
        ProbeCorners corners;
        for (int i = 0; i < 8; ++i) corners.probes[i] = &grid.probes[tile.probe_ids[i]];
        corners.weights = trilinear_weights(local.x / kTileEdge, local.y / kTileEdge,
                                            local.z / kTileEdge);
        interp_probes(corners, refl, order, grid.n_a, f_a.data());
    }

    const double ndv_input = opt.no_fresnel ? 1.0 : n_dot_v;
    Vec3 rgb = decode_color(mlp, f_s.data(), f_a.data(), ndv_input, opt.camera_id,
                            cache ? &cache->dec : nullptr);
    if (cache) {
        cache->local = local;
        cache->degenerate = degenerate;
        cache->grad_vec = gvec;
        cache->grad_len = glen;
        cache->normal = normal;
        cache->view = view;
        cache->refl = refl;
        cache->n_dot_v = n_dot_v;
        cache->f_s = f_s;
        cache->f_a = f_a;
        cache->color = rgb;
        cache->shaded = true;
    }
    return rgb;
}

RayResult render_ray(const SparseGrid& grid, const DecoderMlp& mlp, const Vec3& origin,
                     const Vec3& dir, const RenderOptions& opt, RayWorkspace& ws) {
    ws.samples.clear();
    ws.has_extra = false;
    RayResult res;
    res.color = opt.background;
    const std::vector<double> ts = march_ray(grid, origin, dir, opt.n_max);
    if (ts.empty()) return res;

    const double h = grid.voxel_size;
    const Vec3 view = -dir; // unit, toward the camera
    ws.samples.resize(ts.size());
    for (size_t i = 0; i < ts.size(); ++i) {
        RaySample& s = ws.samples[i];
        s.t = ts[i];
        s.pos = origin + ts[i] * dir;
        s.sdf = grid.sample_sdf(s.pos).value;
        s.shaded = false;
    }
    ws.pos_extra = origin + (ts.back() + h) * dir;
    ws.sdf_extra = grid.sample_sdf(ws.pos_extra).value;
    ws.has_extra = true;

    Vec3 c{0, 0, 0};
    double trans = 1.0, acc = 0.0;
    size_t live = ws.samples.size();
    for (size_t i = 0; i < ws.samples.size(); ++i) {
        RaySample& s = ws.samples[i];
        const double s_next = (i + 1 < ws.samples.size()) ? ws.samples[i + 1].sdf : ws.sdf_extra;
        s.alpha = alpha_from_sdf(s.sdf, s_next, opt.tau);
        s.trans = trans;
        s.weight = trans * s.alpha;
        if (opt.need_colors && s.weight > 0.0) {
            const Vec3 v = grid.world_to_voxel(s.pos);
            const int tx = static_cast<int>(std::floor(v.x)) >> 4;
            const int ty = static_cast<int>(std::floor(v.y)) >> 4;
            const int tz = static_cast<int>(std::floor(v.z)) >> 4;
            s.tile = grid.tile_index(tx, ty, tz);
            if (s.tile >= 0) {
                s.color = decode_fused(grid, mlp, grid.tiles[s.tile], s.pos, view, opt, &s);
                c += s.weight * s.color;
            }
        }
        acc += s.weight;
        trans *= 1.0 - s.alpha;
        if (opt.early_stop_transmittance > 0.0 && trans < opt.early_stop_transmittance) {
            live = i + 1;
            // Keep the "one past the end" SDF consistent with the alpha of the
            // last live sample so the backward pass sees the same pairing.
            if (live < ws.samples.size()) {
                ws.sdf_extra = ws.samples[live].sdf;
                ws.pos_extra = ws.samples[live].pos;
            }
            break;
        }
    }
    ws.samples.resize(live);
    res.color = c + (1.0 - acc) * opt.background;
    res.acc_alpha = acc;
    res.trans_end = trans;
    return res;
}

namespace {

// dL/dn through the reflected vector and the incidence angle, then down to the
// six central-difference SDF samples behind the unnormalized gradient.
void normal_chain_backward(const SparseGrid& grid, GradBuffers& gb, const RaySample& s,
                           const Vec3& d_refl, double d_ndotv) {
    if (s.degenerate) return;
    const Vec3& n = s.normal;
    const Vec3& v = s.view;
    // r = 2 (n.v) n - v  =>  dr_b/dn_a = 2 (v_a n_b + (n.v) delta_ab)
    Vec3 dn = 2.0 * (d_refl.dot(n)) * v + 2.0 * n.dot(v) * d_refl;
    dn += d_ndotv * v;
    // n = g/|g|  =>  dL/dg = (I - n n^T) dn / |g|
    Vec3 dg = (dn - n * dn.dot(n)) / s.grad_len;
    const double h = grid.voxel_size;
    const double inv2h = 1.0 / (2.0 * h);
    const Vec3 axes[3] = {{h, 0, 0}, {0, h, 0}, {0, 0, h}};
    const double comp[3] = {dg.x, dg.y, dg.z};
    for (int a = 0; a < 3; ++a) {
        if (comp[a] == 0.0) continue;
        scatter_smooth_grad(grid, gb, s.pos + axes[a], comp[a] * inv2h);
        scatter_smooth_grad(grid, gb, s.pos - axes[a], -comp[a] * inv2h);
    }
}

} // namespace

void render_ray_backward(const SparseGrid& grid, const DecoderMlp& mlp, const RenderOptions& opt,
                         const RayWorkspace& ws, const Vec3& upstream_color, double upstream_alpha,
                         GradBuffers& gb) {
    const size_t n = ws.samples.size();
    if (n == 0) return;
    const int order = opt.sh_order_override > 0 ? std::min(opt.sh_order_override, grid.sh_order)
                                                : grid.sh_order;

    // dL/dw_i = g . (C_i - bg) + dL/dA
    std::vector<double> dw(n), dalpha(n);
    for (size_t i = 0; i < n; ++i) {
        const RaySample& s = ws.samples[i];
        const Vec3 ci = s.shaded ? s.color : Vec3{0, 0, 0};
        dw[i] = upstream_color.dot(ci - opt.background) + upstream_alpha;
    }
    double suffix = 0.0; // sum_{k>i} dw_k w_k
    for (size_t ii = n; ii-- > 0;) {
        const RaySample& s = ws.samples[ii];
        double term = 0.0;
        if (1.0 - s.alpha > 1e-12) term = suffix / (1.0 - s.alpha);
        dalpha[ii] = dw[ii] * s.trans - term;
        suffix += dw[ii] * s.weight;
    }

    // Alpha derivatives into per-sample SDF gradients.
    std::vector<double> ds(n + 1, 0.0);
    const double tau = opt.tau;
    for (size_t i = 0; i < n; ++i) {
        const RaySample& s = ws.samples[i];
        if (s.alpha <= 0.0 || dalpha[i] == 0.0) continue;
        const double s_next = (i + 1 < n) ? ws.samples[i + 1].sdf : ws.sdf_extra;
        const double a = sigmoid(tau * s.sdf);
        const double b = sigmoid(tau * s_next);
        const double da = tau * a * (1.0 - a);
        const double db = tau * b * (1.0 - b);
        ds[i] += dalpha[i] * b * da / (a * a);
        ds[i + 1] += dalpha[i] * (-db / a);
    }

    // Shading chain.
    if (opt.need_colors) {
        static thread_local std::vector<double> grad_fs, grad_fa;
        for (size_t i = 0; i < n; ++i) {
            const RaySample& s = ws.samples[i];
            if (!s.shaded || s.tile < 0) continue;
            const Vec3 dcolor = s.weight * upstream_color;
            const double up[3] = {dcolor.x, dcolor.y, dcolor.z};
            grad_fs.assign(grid.n_s, 0.0);
            grad_fa.assign(grid.n_a, 0.0);
            double d_ndotv_in = 0.0;
            decode_backward(mlp, s.dec, opt.no_fresnel ? 1.0 : s.n_dot_v, opt.camera_id, up,
                            gb.mlp, grad_fs.data(), grad_fa.data(), &d_ndotv_in);
            const Tile& tile = grid.tiles[s.tile];
            if (!opt.no_spatial)
                grid.spatial_features_backward(tile, s.local, grad_fs.data(),
                                               gb.plane_x[s.tile].data(),
                                               gb.plane_y[s.tile].data(),
                                               gb.plane_z[s.tile].data());
            Vec3 d_refl{0, 0, 0};
            if (!opt.no_angular) {
                ProbeCorners corners;
                std::array<double*, 8> cgrads;
                for (int k = 0; k < 8; ++k) {
                    corners.probes[k] = &grid.probes[tile.probe_ids[k]];
                    cgrads[k] = gb.probes[tile.probe_ids[k]].data();
                }
                corners.weights = trilinear_weights(s.local.x / kTileEdge, s.local.y / kTileEdge,
                                                    s.local.z / kTileEdge);
                backprop_probe(std::span<const double>(grad_fa.data(), grid.n_a), corners, s.refl,
                               order, grid.n_a, cgrads, &d_refl);
            }
            const double d_ndotv = opt.no_fresnel ? 0.0 : d_ndotv_in;
            normal_chain_backward(grid, gb, s, d_refl, d_ndotv);
        }
    }

    // SDF sample gradients into the smoothed grid.
    for (size_t i = 0; i < n; ++i)
        if (ds[i] != 0.0) scatter_smooth_grad(grid, gb, ws.samples[i].pos, ds[i]);
    if (ds[n] != 0.0 && ws.has_extra) scatter_smooth_grad(grid, gb, ws.pos_extra, ds[n]);
}

RenderedImage render_image(const SparseGrid& grid, const DecoderMlp& mlp, const Camera& camera,
                           const RenderOptions& opt) {
    RenderedImage out;
    out.color = ImageRGB(camera.width, camera.height);
    out.alpha = ImageGray(camera.width, camera.height);
#pragma omp parallel for schedule(dynamic, 4)
    for (int v = 0; v < camera.height; ++v) {
        RayWorkspace ws;
        for (int u = 0; u < camera.width; ++u) {
            const Vec3 dir = camera.pixel_dir(u + 0.5, v + 0.5);
            RayResult r = render_ray(grid, mlp, camera.pos, dir, opt, ws);
            out.color.set_pixel(u, v, r.color);
            out.alpha.at(u, v) = r.acc_alpha;
        }
    }
    return out;
}

} // namespace sdfrecon
