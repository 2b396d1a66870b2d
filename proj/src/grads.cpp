#include "sdfrecon/grads.hpp"

#include <cmath>

namespace sdfrecon {

void GradBuffers::init(const SparseGrid& grid, const DecoderMlp& decoder) {
    const size_t nt = grid.tiles.size();
    const size_t plane_size = static_cast<size_t>(kTileEdge) * kTileEdge * grid.n_s;
    raw_sdf.assign(nt, std::vector<double>(kTileVoxels, 0.0));
    smooth_sdf.assign(nt, std::vector<double>(kTileVoxels, 0.0));
    plane_x.assign(nt, std::vector<double>(plane_size, 0.0));
    plane_y.assign(nt, std::vector<double>(plane_size, 0.0));
    plane_z.assign(nt, std::vector<double>(plane_size, 0.0));
    probes.resize(grid.probes.size());
    for (size_t i = 0; i < probes.size(); ++i) probes[i].assign(grid.probes[i].coeffs.size(), 0.0);
    mlp.init_like(decoder);
}

void GradBuffers::clear() {
    auto z = [](std::vector<std::vector<double>>& vv) {
        for (auto& v : vv) std::fill(v.begin(), v.end(), 0.0);
    };
    z(raw_sdf);
    z(smooth_sdf);
    z(plane_x);
    z(plane_y);
    z(plane_z);
    z(probes);
    mlp.clear();
}

void GradBuffers::add(const GradBuffers& o) {
    auto acc = [](std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
        for (size_t i = 0; i < a.size(); ++i)
            for (size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
    };
    acc(raw_sdf, o.raw_sdf);
    acc(smooth_sdf, o.smooth_sdf);
    acc(plane_x, o.plane_x);
    acc(plane_y, o.plane_y);
    acc(plane_z, o.plane_z);
    acc(probes, o.probes);
    mlp.add(o.mlp);
}

void scatter_smooth_grad(const SparseGrid& grid, GradBuffers& gb, const Vec3& p, double g) {
    Vec3 c = grid.world_to_voxel(p) - Vec3(0.5, 0.5, 0.5);
    int bx = static_cast<int>(std::floor(c.x));
    int by = static_cast<int>(std::floor(c.y));
    int bz = static_cast<int>(std::floor(c.z));
    double fx = c.x - bx, fy = c.y - by, fz = c.z - bz;
    for (int i = 0; i < 8; ++i) {
        double w = ((i & 1) ? fx : 1.0 - fx) * ((i & 2) ? fy : 1.0 - fy) *
                   ((i & 4) ? fz : 1.0 - fz);
        if (w == 0.0) continue;
        int vx = bx + (i & 1), vy = by + ((i >> 1) & 1), vz = bz + ((i >> 2) & 1);
        if (vx < 0 || vy < 0 || vz < 0 || vx >= grid.resolution.x || vy >= grid.resolution.y ||
            vz >= grid.resolution.z)
            continue;
        int ti = grid.tile_index(vx >> 4, vy >> 4, vz >> 4);
        if (ti < 0) continue;
        gb.smooth_sdf[ti][voxel_index(vx & 15, vy & 15, vz & 15)] += w * g;
    }
}

void finalize_smooth_grads(const SparseGrid& grid, GradBuffers& gb) {
    const auto& w = gaussian_kernel_1d();
#pragma omp parallel for schedule(dynamic)
    for (int ti = 0; ti < static_cast<int>(grid.tiles.size()); ++ti) {
        const Tile& tile = grid.tiles[ti];
        const int ox = tile.coords.x * kTileEdge;
        const int oy = tile.coords.y * kTileEdge;
        const int oz = tile.coords.z * kTileEdge;
        for (int x = 0; x < kTileEdge; ++x)
            for (int y = 0; y < kTileEdge; ++y)
                for (int z = 0; z < kTileEdge; ++z) {
                    double acc = 0.0;
                    for (int dx = -kSmoothRadius; dx <= kSmoothRadius; ++dx)
                        for (int dy = -kSmoothRadius; dy <= kSmoothRadius; ++dy)
                            for (int dz = -kSmoothRadius; dz <= kSmoothRadius; ++dz) {
                                int vx = ox + x + dx, vy = oy + y + dy, vz = oz + z + dz;
                                if (vx < 0 || vy < 0 || vz < 0 || vx >= grid.resolution.x ||
                                    vy >= grid.resolution.y || vz >= grid.resolution.z)
                                    continue;
                                int nti = grid.tile_index(vx >> 4, vy >> 4, vz >> 4);
                                if (nti < 0) continue;
                                double sw = w[dx + kSmoothRadius] * w[dy + kSmoothRadius] *
                                            w[dz + kSmoothRadius];
                                acc += sw *
                                       gb.smooth_sdf[nti][voxel_index(vx & 15, vy & 15, vz & 15)];
                            }
                    gb.raw_sdf[ti][voxel_index(x, y, z)] += acc;
                }
    }
}

} // namespace sdfrecon
