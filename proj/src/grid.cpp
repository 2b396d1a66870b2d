#include "sdfrecon/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sdfrecon {

const std::array<double, 5>& gaussian_kernel_1d() {
    static const std::array<double, 5> taps = [] {
        std::array<double, 5> w;
        double sum = 0.0;
        for (int d = -kSmoothRadius; d <= kSmoothRadius; ++d) {
            w[d + kSmoothRadius] = std::exp(-0.5 * d * d);
            sum += w[d + kSmoothRadius];
        }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return taps;
}

int SparseGrid::tile_index(int tx, int ty, int tz) const {
    auto it = tile_lookup_.find(pack_coords(tx, ty, tz));
    return it == tile_lookup_.end() ? -1 : it->second;
}

Tile* SparseGrid::tile_at(int tx, int ty, int tz) {
    int i = tile_index(tx, ty, tz);
    return i < 0 ? nullptr : &tiles[i];
}

const Tile* SparseGrid::tile_at(int tx, int ty, int tz) const {
    int i = tile_index(tx, ty, tz);
    return i < 0 ? nullptr : &tiles[i];
}

int SparseGrid::probe_index(int gx, int gy, int gz) const {
    auto it = probe_lookup_.find(pack_coords(gx, gy, gz));
    return it == probe_lookup_.end() ? -1 : it->second;
}

int SparseGrid::ensure_probe(int gx, int gy, int gz) {
    uint64_t key = pack_coords(gx, gy, gz);
    auto it = probe_lookup_.find(key);
    if (it != probe_lookup_.end()) return it->second;
    ProbeSH p;
    p.n_a = n_a;
    p.coeffs.assign(static_cast<size_t>(sh_order) * sh_order * n_a, 0.0);
    int idx = static_cast<int>(probes.size());
    probes.push_back(std::move(p));
    probe_coords.push_back({gx, gy, gz});
    probe_lookup_.emplace(key, idx);
    return idx;
}

int SparseGrid::allocate_tile(int tx, int ty, int tz) {
    uint64_t key = pack_coords(tx, ty, tz);
    auto it = tile_lookup_.find(key);
    if (it != tile_lookup_.end()) return it->second;
    Tile t;
    t.coords = {tx, ty, tz};
    t.raw_sdf.assign(kTileVoxels, far_field());
    t.smooth_sdf.assign(kTileVoxels, far_field());
    const size_t plane_size = static_cast<size_t>(kTileEdge) * kTileEdge * n_s;
    t.plane_x.assign(plane_size, 0.5);
    t.plane_y.assign(plane_size, 0.5);
    t.plane_z.assign(plane_size, 0.5);
    for (int i = 0; i < 8; ++i)
        t.probe_ids[i] = ensure_probe(tx + (i & 1), ty + ((i >> 1) & 1), tz + ((i >> 2) & 1));
    int idx = static_cast<int>(tiles.size());
    tiles.push_back(std::move(t));
    tile_lookup_.emplace(key, idx);
    return idx;
}

double SparseGrid::raw_value(int vx, int vy, int vz) const {
    if (vx < 0 || vy < 0 || vz < 0 || vx >= resolution.x || vy >= resolution.y ||
        vz >= resolution.z)
        return far_field();
    const Tile* t = tile_at(vx >> 4, vy >> 4, vz >> 4);
    if (!t) return far_field();
    return t->raw_sdf[voxel_index(vx & 15, vy & 15, vz & 15)];
}

double SparseGrid::smooth_value(int vx, int vy, int vz) const {
    if (vx < 0 || vy < 0 || vz < 0 || vx >= resolution.x || vy >= resolution.y ||
        vz >= resolution.z)
        return far_field();
    const Tile* t = tile_at(vx >> 4, vy >> 4, vz >> 4);
    if (!t) return far_field();
    return t->smooth_sdf[voxel_index(vx & 15, vy & 15, vz & 15)];
}

namespace {

template <typename Getter>
SdfSample sample_trilinear(const SparseGrid& g, const Vec3& p, Getter get) {
    Vec3 c = g.world_to_voxel(p) - Vec3(0.5, 0.5, 0.5);
    int bx = static_cast<int>(std::floor(c.x));
    int by = static_cast<int>(std::floor(c.y));
    int bz = static_cast<int>(std::floor(c.z));
    double fx = c.x - bx, fy = c.y - by, fz = c.z - bz;
    double v = 0.0;
    for (int i = 0; i < 8; ++i) {
        double w = ((i & 1) ? fx : 1.0 - fx) * ((i & 2) ? fy : 1.0 - fy) *
                   ((i & 4) ? fz : 1.0 - fz);
        v += w * get(bx + (i & 1), by + ((i >> 1) & 1), bz + ((i >> 2) & 1));
    }
    Vec3 vc = g.world_to_voxel(p);
    int vx = static_cast<int>(std::floor(vc.x));
    int vy = static_cast<int>(std::floor(vc.y));
    int vz = static_cast<int>(std::floor(vc.z));
    bool inside = vx >= 0 && vy >= 0 && vz >= 0 && vx < g.resolution.x && vy < g.resolution.y &&
                  vz < g.resolution.z && g.tile_index(vx >> 4, vy >> 4, vz >> 4) >= 0;
    return {v, inside};
}

} // namespace

SdfSample SparseGrid::sample_sdf(const Vec3& p) const {
    return sample_trilinear(*this, p,
                            [this](int x, int y, int z) { return smooth_value(x, y, z); });
}

SdfSample SparseGrid::sample_raw(const Vec3& p) const {
    return sample_trilinear(*this, p, [this](int x, int y, int z) { return raw_value(x, y, z); });
}

Vec3 SparseGrid::compute_normal(const Vec3& p, bool* degenerate) const {
    const double h = voxel_size;
    Vec3 g;
    g.x = (sample_sdf(p + Vec3(h, 0, 0)).value - sample_sdf(p - Vec3(h, 0, 0)).value) / (2 * h);
    g.y = (sample_sdf(p + Vec3(0, h, 0)).value - sample_sdf(p - Vec3(0, h, 0)).value) / (2 * h);
    g.z = (sample_sdf(p + Vec3(0, 0, h)).value - sample_sdf(p - Vec3(0, 0, h)).value) / (2 * h);
    double n = g.norm();
    if (n < 1e-8) {
        if (degenerate) *degenerate = true;
        return {0, 0, 0};
    }
    if (degenerate) *degenerate = false;
    return g / n;
}

namespace {

struct BilinearTap {
    int a0, a1;
    double f;
};

// Texel centers sit at integer + 0.5 in tile-local voxel units; edges clamp.
BilinearTap plane_tap(double local) {
    double u = clampd(local - 0.5, 0.0, kTileEdge - 1.0);
    int a0 = std::min(static_cast<int>(u), kTileEdge - 2);
    return {a0, a0 + 1, u - a0};
}

double plane_sample(const std::vector<double>& plane, const BilinearTap& ta, const BilinearTap& tb,
                    int n_s, int k) {
    double v00 = plane[plane_index(ta.a0, tb.a0, n_s, k)];
    double v01 = plane[plane_index(ta.a0, tb.a1, n_s, k)];
    double v10 = plane[plane_index(ta.a1, tb.a0, n_s, k)];
    double v11 = plane[plane_index(ta.a1, tb.a1, n_s, k)];
    return (1 - ta.f) * ((1 - tb.f) * v00 + tb.f * v01) + ta.f * ((1 - tb.f) * v10 + tb.f * v11);
}

void plane_scatter(double* grad, const BilinearTap& ta, const BilinearTap& tb, int n_s, int k,
                   double g) {
    grad[plane_index(ta.a0, tb.a0, n_s, k)] += (1 - ta.f) * (1 - tb.f) * g;
    grad[plane_index(ta.a0, tb.a1, n_s, k)] += (1 - ta.f) * tb.f * g;
    grad[plane_index(ta.a1, tb.a0, n_s, k)] += ta.f * (1 - tb.f) * g;
    grad[plane_index(ta.a1, tb.a1, n_s, k)] += ta.f * tb.f * g;
}

} // namespace

void SparseGrid::sample_spatial_features(const Tile& tile, const Vec3& local, double* f_s) const {
    BilinearTap tx = plane_tap(local.x), ty = plane_tap(local.y), tz = plane_tap(local.z);
    for (int k = 0; k < n_s; ++k) {
        double px = plane_sample(tile.plane_x, ty, tz, n_s, k);
        double py = plane_sample(tile.plane_y, tx, tz, n_s, k);
        double pz = plane_sample(tile.plane_z, tx, ty, n_s, k);
        f_s[k] = px * py * pz;
    }
}

void SparseGrid::spatial_features_backward(const Tile& tile, const Vec3& local,
                                           const double* grad_fs, double* gx, double* gy,
                                           double* gz) const {
    BilinearTap tx = plane_tap(local.x), ty = plane_tap(local.y), tz = plane_tap(local.z);
    for (int k = 0; k < n_s; ++k) {
        double px = plane_sample(tile.plane_x, ty, tz, n_s, k);
        double py = plane_sample(tile.plane_y, tx, tz, n_s, k);
        double pz = plane_sample(tile.plane_z, tx, ty, n_s, k);
        double g = grad_fs[k];
        plane_scatter(gx, ty, tz, n_s, k, g * py * pz);
        plane_scatter(gy, tx, tz, n_s, k, g * px * pz);
        plane_scatter(gz, tx, ty, n_s, k, g * px * py);
    }
}

void SparseGrid::smooth_tile(Tile& tile) {
    constexpr int E = kTileEdge + 2 * kSmoothRadius; // 20
    static thread_local std::vector<double> buf_a, buf_b;
    buf_a.resize(E * E * E);
    buf_b.resize(E * E * E);
    const auto& w = gaussian_kernel_1d();
    const int ox = tile.coords.x * kTileEdge - kSmoothRadius;
    const int oy = tile.coords.y * kTileEdge - kSmoothRadius;
    const int oz = tile.coords.z * kTileEdge - kSmoothRadius;
    auto at = [](std::vector<double>& b, int x, int y, int z) -> double& {
        return b[(x * E + y) * E + z];
    };
    for (int x = 0; x < E; ++x)
        for (int y = 0; y < E; ++y)
            for (int z = 0; z < E; ++z) at(buf_a, x, y, z) = raw_value(ox + x, oy + y, oz + z);
    // Separable passes; only the central 16^3 of the result is used.
    for (int x = kSmoothRadius; x < E - kSmoothRadius; ++x)
        for (int y = 0; y < E; ++y)
            for (int z = 0; z < E; ++z) {
                double s = 0.0;
                for (int d = -kSmoothRadius; d <= kSmoothRadius; ++d)
                    s += w[d + kSmoothRadius] * at(buf_a, x + d, y, z);
                at(buf_b, x, y, z) = s;
            }
    for (int x = kSmoothRadius; x < E - kSmoothRadius; ++x)
        for (int y = kSmoothRadius; y < E - kSmoothRadius; ++y)
            for (int z = 0; z < E; ++z) {
                double s = 0.0;
                for (int d = -kSmoothRadius; d <= kSmoothRadius; ++d)
                    s += w[d + kSmoothRadius] * at(buf_b, x, y + d, z);
                at(buf_a, x, y, z) = s;
            }
    for (int x = 0; x < kTileEdge; ++x)
        for (int y = 0; y < kTileEdge; ++y)
            for (int z = 0; z < kTileEdge; ++z) {
                double s = 0.0;
                for (int d = -kSmoothRadius; d <= kSmoothRadius; ++d)
                    s += w[d + kSmoothRadius] *
                         at(buf_a, x + kSmoothRadius, y + kSmoothRadius, z + kSmoothRadius + d);
                tile.smooth_sdf[voxel_index(x, y, z)] = s;
            }
}

void SparseGrid::smooth_all() {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(tiles.size()); ++i) smooth_tile(tiles[i]);
}

void SparseGrid::raise_sh_order(int new_order) {
    if (new_order < sh_order || new_order > kMaxShOrder)
        throw std::invalid_argument("raise_sh_order: order must not decrease and must be <= 4");
    const int new_nc = new_order * new_order;
    for (auto& p : probes) {
        // Band-major layout: existing coefficients are a prefix, new bands
        // start at zero so the learned function is preserved exactly.
        p.coeffs.resize(static_cast<size_t>(new_nc) * n_a, 0.0);
    }
    sh_order = new_order;
}

size_t SparseGrid::spatial_param_count() const {
    return tiles.size() * 3ull * kTileEdge * kTileEdge * n_s;
}

size_t SparseGrid::probe_param_count() const {
    return tiles.size() * 8ull * sh_order * sh_order * n_a;
}

size_t SparseGrid::sdf_param_count() const { return tiles.size() * static_cast<size_t>(kTileVoxels); }

SparseGrid SparseGrid::subdivide() const {
    SparseGrid out;
    out.voxel_size = voxel_size * 0.5;
    out.origin = origin;
    out.resolution = {resolution.x * 2, resolution.y * 2, resolution.z * 2};
    out.n_s = n_s;
    out.n_a = n_a;
    out.sh_order = sh_order;
    out.lod = lod + 1;
    out.far_field_voxels = far_field_voxels;
    out.band_voxels = band_voxels;

    const double band = band_voxels * out.voxel_size;
    std::vector<double> child_raw(kTileVoxels);

    for (const auto& tile : tiles) {
        for (int child = 0; child < 8; ++child) {
            const int ctx = tile.coords.x * 2 + (child & 1);
            const int cty = tile.coords.y * 2 + ((child >> 1) & 1);
            const int ctz = tile.coords.z * 2 + ((child >> 2) & 1);
            double min_abs = std::numeric_limits<double>::max();
            bool pos = false, neg = false;
            for (int x = 0; x < kTileEdge; ++x)
                for (int y = 0; y < kTileEdge; ++y)
                    for (int z = 0; z < kTileEdge; ++z) {
                        Vec3 p = out.voxel_center(ctx * kTileEdge + x, cty * kTileEdge + y,
                                                  ctz * kTileEdge + z);
                        double s = sample_raw(p).value;
                        child_raw[voxel_index(x, y, z)] = s;
                        min_abs = std::min(min_abs, std::abs(s));
                        (s >= 0 ? pos : neg) = true;
                    }
            if (min_abs > band && !(pos && neg)) continue; // outside the allocation band
            int ti = out.allocate_tile(ctx, cty, ctz);
            Tile& ct = out.tiles[ti];
            ct.raw_sdf = child_raw;
            // Planes: each child's 16x16 plane covers half of the parent's.
            const int offs[3] = {child & 1, (child >> 1) & 1, (child >> 2) & 1};
            auto upsample_plane = [&](const std::vector<double>& src, std::vector<double>& dst,
                                      int axis_a, int axis_b) {
                for (int a = 0; a < kTileEdge; ++a)
                    for (int b = 0; b < kTileEdge; ++b) {
                        BilinearTap ta = plane_tap(offs[axis_a] * 8.0 + (a + 0.5) * 0.5);
                        BilinearTap tb = plane_tap(offs[axis_b] * 8.0 + (b + 0.5) * 0.5);
                        for (int k = 0; k < n_s; ++k)
                            dst[plane_index(a, b, n_s, k)] = plane_sample(src, ta, tb, n_s, k);
                    }
            };
            upsample_plane(tile.plane_x, ct.plane_x, 1, 2);
            upsample_plane(tile.plane_y, ct.plane_y, 0, 2);
            upsample_plane(tile.plane_z, ct.plane_z, 0, 1);
        }
    }

    // Probe coefficients: the new lattice is twice as dense; interpolate from
    // the old lattice with renormalization over the probes that exist.
    const int nc = sh_order * sh_order;
    for (size_t pi = 0; pi < out.probes.size(); ++pi) {
        const Vec3i g = out.probe_coords[pi];
        ProbeSH& np = out.probes[pi];
        double total_w = 0.0;
        for (int i = 0; i < 8; ++i) {
            const int gx = g.x / 2 + ((g.x & 1) ? (i & 1) : 0);
            const int gy = g.y / 2 + ((g.y & 1) ? ((i >> 1) & 1) : 0);
            const int gz = g.z / 2 + ((g.z & 1) ? ((i >> 2) & 1) : 0);
            double w = ((g.x & 1) ? 0.5 : ((i & 1) ? 0.0 : 1.0)) *
                       ((g.y & 1) ? 0.5 : ((i & 2) ? 0.0 : 1.0)) *
                       ((g.z & 1) ? 0.5 : ((i & 4) ? 0.0 : 1.0));
            if (w == 0.0) continue;
            int opi = probe_index(gx, gy, gz);
            if (opi < 0) continue;
            total_w += w;
            const auto& oc = probes[opi].coeffs;
            for (int t = 0; t < nc * n_a; ++t) np.coeffs[t] += w * oc[t];
        }
        if (total_w > 0.0)
            for (int t = 0; t < nc * n_a; ++t) np.coeffs[t] /= total_w;
    }

    out.smooth_all();
    return out;
}

namespace {

SparseGrid init_common(const GridConfig& cfg,
                       const std::function<double(const Vec3i&)>& seed_sdf) {
    if (cfg.resolution.x % kTileEdge || cfg.resolution.y % kTileEdge ||
        cfg.resolution.z % kTileEdge)
        throw std::invalid_argument("grid resolution must be a multiple of 16");
    SparseGrid g;
    g.voxel_size = cfg.voxel_size;
    g.origin = cfg.origin;
    g.resolution = cfg.resolution;
    g.n_s = cfg.n_s;
    g.n_a = cfg.n_a;
    g.sh_order = cfg.sh_order;
    g.far_field_voxels = cfg.far_field_voxels;
    g.band_voxels = cfg.band_voxels;
    const double band = cfg.band_voxels * cfg.voxel_size;
    const int ntx = cfg.resolution.x / kTileEdge;
    const int nty = cfg.resolution.y / kTileEdge;
    const int ntz = cfg.resolution.z / kTileEdge;
    std::vector<double> vals(kTileVoxels);
    for (int tx = 0; tx < ntx; ++tx)
        for (int ty = 0; ty < nty; ++ty)
            for (int tz = 0; tz < ntz; ++tz) {
                double min_abs = std::numeric_limits<double>::max();
                bool pos = false, neg = false;
                for (int x = 0; x < kTileEdge; ++x)
                    for (int y = 0; y < kTileEdge; ++y)
                        for (int z = 0; z < kTileEdge; ++z) {
                            double s = seed_sdf({tx * kTileEdge + x, ty * kTileEdge + y,
                                                 tz * kTileEdge + z});
                            vals[voxel_index(x, y, z)] = s;
                            min_abs = std::min(min_abs, std::abs(s));
                            (s >= 0 ? pos : neg) = true;
                        }
                if (min_abs > band && !(pos && neg)) continue;
                int ti = g.allocate_tile(tx, ty, tz);
                g.tiles[ti].raw_sdf = vals;
            }
    g.smooth_all();
    return g;
}

// Felzenszwalb 1D squared distance transform.
void dt1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
          std::vector<double>& z, int n) {
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = (q - v[k]) * static_cast<double>(q - v[k]) + f[v[k]];
    }
}

// 3D squared EDT of the set where `inside` is true (distance 0 there).
std::vector<double> edt3d(const std::vector<uint8_t>& inside, const Vec3i& res) {
    const double INF = 1e18;
    const int nx = res.x, ny = res.y, nz = res.z;
    std::vector<double> d(static_cast<size_t>(nx) * ny * nz);
    auto idx = [&](int x, int y, int z) { return (static_cast<size_t>(x) * ny + y) * nz + z; };
    for (size_t i = 0; i < d.size(); ++i) d[i] = inside[i] ? 0.0 : INF;
    const int maxn = std::max({nx, ny, nz});
    std::vector<double> f(maxn), out(maxn), zb(maxn + 1);
    std::vector<int> vb(maxn);
    for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y) {
            for (int z = 0; z < nz; ++z) f[z] = d[idx(x, y, z)];
            dt1d(f, out, vb, zb, nz);
            for (int z = 0; z < nz; ++z) d[idx(x, y, z)] = out[z];
        }
    for (int x = 0; x < nx; ++x)
        for (int z = 0; z < nz; ++z) {
            for (int y = 0; y < ny; ++y) f[y] = d[idx(x, y, z)];
            dt1d(f, out, vb, zb, ny);
            for (int y = 0; y < ny; ++y) d[idx(x, y, z)] = out[y];
        }
    for (int y = 0; y < ny; ++y)
        for (int z = 0; z < nz; ++z) {
            for (int x = 0; x < nx; ++x) f[x] = d[idx(x, y, z)];
            dt1d(f, out, vb, zb, nx);
            for (int x = 0; x < nx; ++x) d[idx(x, y, z)] = out[x];
        }
    return d;
}

} // namespace

SparseGrid init_grid_sphere(const GridConfig& cfg, const Vec3& center, double radius) {
    return init_common(cfg, [&](const Vec3i& v) {
        Vec3 p = cfg.origin + Vec3(v.x + 0.5, v.y + 0.5, v.z + 0.5) * cfg.voxel_size;
        return (p - center).norm() - radius;
    });
}

SparseGrid init_grid_visual_hull(const GridConfig& cfg, const std::vector<Camera>& cameras,
                                 const std::vector<MaskImage>& masks) {
    if (cameras.empty() || cameras.size() != masks.size())
        throw std::invalid_argument("visual hull: need one mask per camera");
    const Vec3i res = cfg.resolution;
    std::vector<uint8_t> occ(static_cast<size_t>(res.x) * res.y * res.z, 1);
    auto idx = [&](int x, int y, int z) {
        return (static_cast<size_t>(x) * res.y + y) * res.z + z;
    };
#pragma omp parallel for schedule(dynamic)
    for (int x = 0; x < res.x; ++x)
        for (int y = 0; y < res.y; ++y)
            for (int z = 0; z < res.z; ++z) {
                Vec3 p = cfg.origin + Vec3(x + 0.5, y + 0.5, z + 0.5) * cfg.voxel_size;
                for (size_t c = 0; c < cameras.size(); ++c) {
                    double u, v;
                    if (!cameras[c].project(p, u, v) ||
                        !masks[c].foreground(static_cast<int>(std::lround(u)),
                                             static_cast<int>(std::lround(v)))) {
                        occ[idx(x, y, z)] = 0;
                        break;
                    }
                }
            }
    std::vector<uint8_t> free_set(occ.size());
    for (size_t i = 0; i < occ.size(); ++i) free_set[i] = occ[i] ? 0 : 1;
    std::vector<double> d_to_occ = edt3d(occ, res);
    std::vector<double> d_to_free = edt3d(free_set, res);
    const double max_s = std::max({res.x, res.y, res.z}) * cfg.voxel_size;
    return init_common(cfg, [&](const Vec3i& v) {
        double s = (std::sqrt(std::min(d_to_occ[idx(v.x, v.y, v.z)], 1e12)) -
                    std::sqrt(std::min(d_to_free[idx(v.x, v.y, v.z)], 1e12))) *
                   cfg.voxel_size;
        return clampd(s, -max_s, max_s);
    });
}

} // namespace sdfrecon
