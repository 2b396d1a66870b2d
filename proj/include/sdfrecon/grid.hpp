#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "sdfrecon/camera.hpp"
#include "sdfrecon/sh.hpp"
#include "sdfrecon/vec.hpp"

namespace sdfrecon {

inline constexpr int kTileEdge = 16;
inline constexpr int kTileVoxels = kTileEdge * kTileEdge * kTileEdge;
inline constexpr int kSmoothRadius = 2; // 5^3 Gaussian kernel

// Normalized 1D Gaussian taps (sigma = 1 voxel, radius 2), index 0..4 for
// offsets -2..+2. Weights sum to 1.
const std::array<double, 5>& gaussian_kernel_1d();

struct Tile {
    Vec3i coords; // tile coordinates; voxel origin is coords * 16
    std::vector<double> raw_sdf;    // 16^3, x-major: idx = (x*16 + y)*16 + z
    std::vector<double> smooth_sdf; // 16^3, Gaussian of raw (with neighbor halo)
    // Tri-plane features, 16x16 texels with n_s channels each.
    // plane_x is indexed by (y,z), plane_y by (x,z), plane_z by (x,y):
    // idx = (a*16 + b)*n_s + k.
    std::vector<double> plane_x, plane_y, plane_z;
    std::array<int, 8> probe_ids{}; // corner probes, trilinear_weights() order
};

inline int voxel_index(int x, int y, int z) { return (x * kTileEdge + y) * kTileEdge + z; }
inline int plane_index(int a, int b, int n_s, int k) { return (a * kTileEdge + b) * n_s + k; }

struct SdfSample {
    double value = 0.0;
    bool inside = false; // containing tile allocated
};

struct GridConfig {
    double voxel_size = 1.0 / 16.0;
    Vec3 origin{-0.5, -0.5, -0.5};
    Vec3i resolution{16, 16, 16}; // multiples of 16
    int n_s = 4;
    int n_a = 4;
    int sh_order = 2;
    double far_field_voxels = 4.0; // SDF returned outside allocated tiles
    int band_voxels = 6;           // tile allocation band around the zero crossing
};

// Sparse tiled voxel structure: SDF values, per-tile tri-plane features and a
// pool of probe coefficient blocks shared between adjacent tiles.
class SparseGrid {
public:
    double voxel_size = 1.0;
    Vec3 origin{0, 0, 0};
    Vec3i resolution{16, 16, 16};
    int n_s = 4;
    int n_a = 4;
    int sh_order = 2;
    int lod = 0;
    double far_field_voxels = 4.0;
    int band_voxels = 6;

    std::vector<Tile> tiles;
    std::vector<ProbeSH> probes;
    std::vector<Vec3i> probe_coords; // lattice coordinate of each pool entry

    double far_field() const { return far_field_voxels * voxel_size; }
    Vec3 world_max() const {
        return origin + Vec3(resolution.x, resolution.y, resolution.z) * voxel_size;
    }
    Vec3 voxel_center(int vx, int vy, int vz) const {
        return origin + Vec3(vx + 0.5, vy + 0.5, vz + 0.5) * voxel_size;
    }

    int tile_index(int tx, int ty, int tz) const;
    Tile* tile_at(int tx, int ty, int tz);
    const Tile* tile_at(int tx, int ty, int tz) const;
    int probe_index(int gx, int gy, int gz) const;

    // Global voxel reads with far-field fallback outside allocated tiles.
    double raw_value(int vx, int vy, int vz) const;
    double smooth_value(int vx, int vy, int vz) const;

    // Trilinear interpolation of the smoothed SDF at a world point.
    SdfSample sample_sdf(const Vec3& p) const;
    SdfSample sample_raw(const Vec3& p) const;

    // Normal of the smoothed SDF via central differences at voxel resolution.
    // Sets *degenerate when the gradient magnitude is below 1e-8.
    Vec3 compute_normal(const Vec3& p, bool* degenerate = nullptr) const;

    // Channel-wise tri-plane product at a tile-local position (units of
    // voxels, in [0,16)). Writes n_s values.
    void sample_spatial_features(const Tile& tile, const Vec3& local, double* f_s) const;

    // Scatters dL/dF_s into the three plane gradient buffers (same layout as
    // the planes themselves).
    void spatial_features_backward(const Tile& tile, const Vec3& local, const double* grad_fs,
                                   double* gx, double* gy, double* gz) const;

    // Recomputes smooth_sdf for one tile / all tiles (separable 5^3 Gaussian,
    // halo read from neighbors, far-field clamp at the sparse boundary).
    void smooth_tile(Tile& tile);
    void smooth_all();

    // Allocation helpers. allocate_tile creates corner probes on demand.
    int allocate_tile(int tx, int ty, int tz);

    // Next level of detail: voxel size halves, features upsampled, tiles
    // beyond the allocation band pruned.
    SparseGrid subdivide() const;

    // Zero-pads probe coefficient blocks up to new_order^2 coefficients.
    void raise_sh_order(int new_order);

    // Parameter accounting per tile, counting corner probes duplicated the way
    // they are addressed (8 per tile), not deduplicated pool entries.
    size_t spatial_param_count() const;
    size_t probe_param_count() const;
    size_t sdf_param_count() const;

    Vec3 world_to_voxel(const Vec3& p) const { return (p - origin) / voxel_size; }

private:
    std::unordered_map<uint64_t, int> tile_lookup_;
    std::unordered_map<uint64_t, int> probe_lookup_;
    int ensure_probe(int gx, int gy, int gz);
};

// Initialization from an analytic seed SDF (sphere mode) or from silhouette
// masks (visual hull mode). Plane features start at 0.5 so the multiplicative
// factorization has signal; probe coefficients start at zero.
SparseGrid init_grid_sphere(const GridConfig& cfg, const Vec3& center, double radius);

struct MaskImage {
    int width = 0, height = 0;
    std::vector<uint8_t> data; // row-major, >127 = foreground

    bool foreground(int u, int v) const {
        if (u < 0 || v < 0 || u >= width || v >= height) return false;
        return data[static_cast<size_t>(v) * width + u] > 127;
    }
};

SparseGrid init_grid_visual_hull(const GridConfig& cfg, const std::vector<Camera>& cameras,
                                 const std::vector<MaskImage>& masks);

} // namespace sdfrecon
