#include "sdfrecon/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace sdfrecon {

PhotoPixel photo_pixel(const Vec3& c, const Vec3& c_gt, bool in_mask, double acc_alpha,
                       double scale, const Vec3* frozen_w, const double* frozen_wa) {
    PhotoPixel out;
    if (in_mask) {
        const double d[3] = {c.x - c_gt.x, c.y - c_gt.y, c.z - c_gt.z};
        double w[3];
        if (frozen_w) {
            w[0] = frozen_w->x;
            w[1] = frozen_w->y;
            w[2] = frozen_w->z;
        } else {
            w[0] = relative_weight(c.x, c_gt.x, kPhotoEps);
            w[1] = relative_weight(c.y, c_gt.y, kPhotoEps);
            w[2] = relative_weight(c.z, c_gt.z, kPhotoEps);
        }
        double g[3];
        for (int k = 0; k < 3; ++k) {
            out.plain += scale * d[k] * d[k];
            out.weighted += scale * w[k] * d[k] * d[k];
            g[k] = scale * 2.0 * w[k] * d[k];
        }
        out.d_color = {g[0], g[1], g[2]};
    } else {
        const double wa = frozen_wa ? *frozen_wa
                                    : relative_weight(std::max(acc_alpha, 0.0), 0.0, kPhotoEps);
        out.plain = scale * acc_alpha * acc_alpha;
        out.weighted = scale * wa * acc_alpha * acc_alpha;
        out.d_alpha = scale * 2.0 * wa * acc_alpha;
    }
    return out;
}

LossResult loss_photo(const ImageRGB& rendered, const ImageGray& acc_alpha, const ImageRGB& gt,
                      const ImageGray& mask, double scale, ImageRGB* d_color, ImageGray* d_alpha) {
    if (rendered.width != gt.width || rendered.height != gt.height)
        throw std::invalid_argument("loss_photo: image shape mismatch");
    LossResult res;
    for (int v = 0; v < rendered.height; ++v)
        for (int u = 0; u < rendered.width; ++u) {
            PhotoPixel p = photo_pixel(rendered.pixel(u, v), gt.pixel(u, v), mask.at(u, v) > 0.5,
                                       acc_alpha.at(u, v), scale);
            res.plain += p.plain;
            res.weighted += p.weighted;
            if (d_color) d_color->set_pixel(u, v, p.d_color);
            if (d_alpha) d_alpha->at(u, v) = p.d_alpha;
        }
    return res;
}

namespace {

// Per-tile working set: smoothed values with a 2-voxel halo, an allocation
// mask, and a gradient staging buffer flushed back to the sparse structure.
struct TileHalo {
    static constexpr int R = kSmoothRadius;
    static constexpr int E = kTileEdge + 2 * R;
    int ox, oy, oz; // global voxel coords of buffer cell (0,0,0)
    std::vector<double> val;
    std::vector<uint8_t> alloc;
    std::vector<double> grad;

    static int idx(int x, int y, int z) { return (x * E + y) * E + z; }

    void load(const SparseGrid& g, const Tile& tile) {
        ox = tile.coords.x * kTileEdge - R;
        oy = tile.coords.y * kTileEdge - R;
        oz = tile.coords.z * kTileEdge - R;
        val.resize(E * E * E);
        alloc.resize(E * E * E);
        grad.assign(E * E * E, 0.0);
        for (int x = 0; x < E; ++x)
            for (int y = 0; y < E; ++y)
                for (int z = 0; z < E; ++z) {
                    const int vx = ox + x, vy = oy + y, vz = oz + z;
                    bool in = vx >= 0 && vy >= 0 && vz >= 0 && vx < g.resolution.x &&
                              vy < g.resolution.y && vz < g.resolution.z &&
                              g.tile_index(vx >> 4, vy >> 4, vz >> 4) >= 0;
                    alloc[idx(x, y, z)] = in;
                    val[idx(x, y, z)] = in ? g.smooth_value(vx, vy, vz) : g.far_field();
                }
    }

    void flush(const SparseGrid& g, GradBuffers& gb) const {
        for (int x = 0; x < E; ++x)
            for (int y = 0; y < E; ++y)
                for (int z = 0; z < E; ++z) {
                    const double gv = grad[idx(x, y, z)];
                    if (gv == 0.0 || !alloc[idx(x, y, z)]) continue;
                    const int vx = ox + x, vy = oy + y, vz = oz + z;
                    const int ti = g.tile_index(vx >> 4, vy >> 4, vz >> 4);
                    gb.smooth_sdf[ti][voxel_index(vx & 15, vy & 15, vz & 15)] += gv;
                }
    }

    // Central-difference gradient at buffer coords (needs 1-cell margin).
    Vec3 sdf_grad(int x, int y, int z, double inv2h) const {
        return {(val[idx(x + 1, y, z)] - val[idx(x - 1, y, z)]) * inv2h,
                (val[idx(x, y + 1, z)] - val[idx(x, y - 1, z)]) * inv2h,
                (val[idx(x, y, z + 1)] - val[idx(x, y, z - 1)]) * inv2h};
    }

    void scatter_stencil(int x, int y, int z, const Vec3& dg, double inv2h) {
        grad[idx(x + 1, y, z)] += dg.x * inv2h;
        grad[idx(x - 1, y, z)] -= dg.x * inv2h;
        grad[idx(x, y + 1, z)] += dg.y * inv2h;
        grad[idx(x, y - 1, z)] -= dg.y * inv2h;
        grad[idx(x, y, z + 1)] += dg.z * inv2h;
        grad[idx(x, y, z - 1)] -= dg.z * inv2h;
    }
};

} // namespace

LossResult loss_sdf(const SparseGrid& grid, const SparseGrid& wsrc, double lambda,
                    GradBuffers* gb) {
    LossResult res;
    for (size_t ti = 0; ti < grid.tiles.size(); ++ti) {
        const Tile& tile = grid.tiles[ti];
        const Tile& wt = wsrc.tiles[ti];
        for (int v = 0; v < kTileVoxels; ++v) {
            const double r = tile.smooth_sdf[v] - tile.raw_sdf[v];
            const double w = relative_weight(std::abs(wt.smooth_sdf[v]), std::abs(wt.raw_sdf[v]),
                                             kPhotoEps) *
                             proximity_weight(wt.smooth_sdf[v]);
            res.plain += lambda * r * r;
            res.weighted += lambda * w * r * r;
            if (gb) {
                const double g = 2.0 * lambda * w * r;
                gb->smooth_sdf[ti][v] += g;
                gb->raw_sdf[ti][v] -= g;
            }
        }
    }
    return res;
}

LossResult loss_eikonal(const SparseGrid& grid, const SparseGrid& wsrc, double lambda,
                        GradBuffers* gb) {
    LossResult res;
    const double inv2h = 1.0 / (2.0 * grid.voxel_size);
    TileHalo halo;
    for (size_t ti = 0; ti < grid.tiles.size(); ++ti) {
        halo.load(grid, grid.tiles[ti]);
        const Tile& wt = wsrc.tiles[ti];
        for (int x = 0; x < kTileEdge; ++x)
            for (int y = 0; y < kTileEdge; ++y)
                for (int z = 0; z < kTileEdge; ++z) {
                    const Vec3 g = halo.sdf_grad(x + TileHalo::R, y + TileHalo::R,
                                                 z + TileHalo::R, inv2h);
                    const double len = g.norm();
                    const double e = len - 1.0;
                    const double w = proximity_weight(wt.smooth_sdf[voxel_index(x, y, z)]);
                    res.plain += lambda * e * e;
                    res.weighted += lambda * w * e * e;
                    if (gb && len > 1e-12) {
                        const Vec3 dg = (2.0 * lambda * w * e / len) * g;
                        halo.scatter_stencil(x + TileHalo::R, y + TileHalo::R, z + TileHalo::R, dg,
                                             inv2h);
                    }
                }
        if (gb) halo.flush(grid, *gb);
    }
    return res;
}

LossResult loss_normal(const SparseGrid& grid, const SparseGrid& wsrc, double lambda,
                       GradBuffers* gb) {
    LossResult res;
    const double inv2h = 1.0 / (2.0 * grid.voxel_size);
    TileHalo halo;
    auto normal_at = [&](int bx, int by, int bz, Vec3& n, double& len) {
        const Vec3 g = halo.sdf_grad(bx, by, bz, inv2h);
        len = g.norm();
        if (len < 1e-8) return false;
        n = g / len;
        return true;
    };
    for (size_t ti = 0; ti < grid.tiles.size(); ++ti) {
        halo.load(grid, grid.tiles[ti]);
        const Tile& wt = wsrc.tiles[ti];
        for (int x = 0; x < kTileEdge; ++x)
            for (int y = 0; y < kTileEdge; ++y)
                for (int z = 0; z < kTileEdge; ++z) {
                    const int bx = x + TileHalo::R, by = y + TileHalo::R, bz = z + TileHalo::R;
                    Vec3 n1;
                    double l1;
                    if (!normal_at(bx, by, bz, n1, l1)) continue;
                    const double w = proximity_weight(wt.smooth_sdf[voxel_index(x, y, z)]);
                    const int off[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
                    for (int a = 0; a < 3; ++a) {
                        const int nx = bx + off[a][0], ny = by + off[a][1], nz = bz + off[a][2];
                        if (!halo.alloc[TileHalo::idx(nx, ny, nz)]) continue;
                        Vec3 n2;
                        double l2;
                        if (!normal_at(nx, ny, nz, n2, l2)) continue;
                        const Vec3 d = n2 - n1;
                        const double v = d.norm2();
                        res.plain += lambda * v;
                        res.weighted += lambda * w * v;
                        if (gb) {
                            const Vec3 dn2 = 2.0 * lambda * w * d;
                            const Vec3 dn1 = -dn2;
                            const Vec3 dg2 = (dn2 - n2 * dn2.dot(n2)) / l2;
                            const Vec3 dg1 = (dn1 - n1 * dn1.dot(n1)) / l1;
                            halo.scatter_stencil(nx, ny, nz, dg2, inv2h);
                            halo.scatter_stencil(bx, by, bz, dg1, inv2h);
                        }
                    }
                }
        if (gb) halo.flush(grid, *gb);
    }
    return res;
}

LossResult loss_features(const SparseGrid& grid, const SparseGrid& wsrc, double lambda,
                         GradBuffers* gb) {
    LossResult res;
    const int n_s = grid.n_s;
    for (size_t ti = 0; ti < grid.tiles.size(); ++ti) {
        const Tile& tile = grid.tiles[ti];
        const Tile& wt = wsrc.tiles[ti];
        auto plane_term = [&](const std::vector<double>& p, const std::vector<double>& wp,
                              std::vector<double>* gp) {
            for (int a = 0; a < kTileEdge; ++a)
                for (int b = 0; b < kTileEdge; ++b)
                    for (int k = 0; k < n_s; ++k) {
                        const int i0 = plane_index(a, b, n_s, k);
                        const int nbrs[2] = {a + 1 < kTileEdge ? plane_index(a + 1, b, n_s, k) : -1,
                                             b + 1 < kTileEdge ? plane_index(a, b + 1, n_s, k) : -1};
                        for (int i1 : nbrs) {
                            if (i1 < 0) continue;
                            const double d = p[i1] - p[i0];
                            const double w =
                                relative_weight(std::abs(wp[i0]), std::abs(wp[i1]), kPhotoEps);
                            res.plain += lambda * d * d;
                            res.weighted += lambda * w * d * d;
                            if (gp) {
                                const double g = 2.0 * lambda * w * d;
                                (*gp)[i1] += g;
                                (*gp)[i0] -= g;
                            }
                        }
                    }
        };
        plane_term(tile.plane_x, wt.plane_x, gb ? &gb->plane_x[ti] : nullptr);
        plane_term(tile.plane_y, wt.plane_y, gb ? &gb->plane_y[ti] : nullptr);
        plane_term(tile.plane_z, wt.plane_z, gb ? &gb->plane_z[ti] : nullptr);
    }
    return res;
}

LossResult loss_probes(const SparseGrid& grid, double lambda, GradBuffers* gb) {
    LossResult res;
    const int stride = grid.sh_order * grid.sh_order * grid.n_a;
    for (size_t pi = 0; pi < grid.probes.size(); ++pi) {
        const Vec3i c = grid.probe_coords[pi];
        const Vec3i offsets[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        for (const Vec3i& off : offsets) {
            const int qi = grid.probe_index(c.x + off.x, c.y + off.y, c.z + off.z);
            if (qi < 0) continue;
            const auto& b1 = grid.probes[pi].coeffs;
            const auto& b2 = grid.probes[qi].coeffs;
            for (int t = 0; t < stride; ++t) {
                const double d = b1[t] - b2[t];
                res.plain += lambda * d * d;
                if (gb) {
                    const double g = 2.0 * lambda * d;
                    gb->probes[pi][t] += g;
                    gb->probes[qi][t] -= g;
                }
            }
        }
    }
    res.weighted = res.plain;
    return res;
}

} // namespace sdfrecon
