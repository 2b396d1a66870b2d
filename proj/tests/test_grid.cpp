#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "sdfrecon/camera.hpp"
#include "sdfrecon/grid.hpp"

using namespace sdfrecon;

namespace {

GridConfig small_cfg() {
    GridConfig cfg;
    cfg.resolution = {32, 32, 32};
    cfg.voxel_size = 1.0 / 32.0;
    cfg.origin = {-0.5, -0.5, -0.5};
    cfg.n_s = 2;
    cfg.n_a = 2;
    cfg.sh_order = 2;
    return cfg;
}

// Grid with every tile allocated and raw SDF set from a callable on world
// position, so smoothing/interpolation tests control the whole field.
template <typename F>
SparseGrid dense_grid(const GridConfig& cfg_in, F&& f) {
    GridConfig cfg = cfg_in;
    cfg.band_voxels = 10000; // allocate everything
    SparseGrid g = init_grid_sphere(cfg, {0, 0, 0}, 0.25);
    for (Tile& t : g.tiles)
        for (int x = 0; x < kTileEdge; ++x)
            for (int y = 0; y < kTileEdge; ++y)
                for (int z = 0; z < kTileEdge; ++z)
                    t.raw_sdf[voxel_index(x, y, z)] =
                        f(g.voxel_center(t.coords.x * kTileEdge + x, t.coords.y * kTileEdge + y,
                                         t.coords.z * kTileEdge + z));
    g.smooth_all();
    return g;
}

} // namespace

TEST_CASE("Gaussian kernel is a normalized sigma-1 window") {
    const auto& w = gaussian_kernel_1d();
    double sum = 0.0;
    for (double v : w) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(w[0] == doctest::Approx(w[4]).epsilon(1e-14));
    CHECK(w[1] == doctest::Approx(w[3]).epsilon(1e-14));
    // Unnormalized taps are exp(-d^2/2), so ratios are exact.
    CHECK(w[1] / w[2] == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(w[0] / w[2] == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("separable smoothing matches a direct 5^3 convolution of raw_value") {
    GridConfig cfg = small_cfg();
    SparseGrid g = init_grid_sphere(cfg, {0.02, -0.03, 0.01}, 0.3);
    const auto& w = gaussian_kernel_1d();
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const Tile& t = g.tiles[rng() % g.tiles.size()];
        const int x = rng() % kTileEdge, y = rng() % kTileEdge, z = rng() % kTileEdge;
        const int gx = t.coords.x * kTileEdge + x;
        const int gy = t.coords.y * kTileEdge + y;
        const int gz = t.coords.z * kTileEdge + z;
        double want = 0.0;
        for (int dx = -2; dx <= 2; ++dx)
            for (int dy = -2; dy <= 2; ++dy)
                for (int dz = -2; dz <= 2; ++dz)
                    want += w[dx + 2] * w[dy + 2] * w[dz + 2] *
                            g.raw_value(gx + dx, gy + dy, gz + dz);
        CHECK(t.smooth_sdf[voxel_index(x, y, z)] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("smoothing and trilinear sampling are exact on linear fields") {
    GridConfig cfg = small_cfg();
    const Vec3 a{0.7, -0.4, 0.2};
    const double b = 0.05;
    SparseGrid g = dense_grid(cfg, [&](const Vec3& p) { return a.dot(p) + b; });
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(-0.3, 0.3); // stay 3+ voxels inside
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 p{uni(rng), uni(rng), uni(rng)};
        SdfSample s = g.sample_sdf(p);
        CHECK(s.inside);
        CHECK(s.value == doctest::Approx(a.dot(p) + b).epsilon(1e-10));
        bool degen = true;
        const Vec3 n = g.compute_normal(p, &degen);
        CHECK_FALSE(degen);
        const Vec3 want = a.normalized();
        CHECK(n.x == doctest::Approx(want.x).epsilon(1e-9));
        CHECK(n.y == doctest::Approx(want.y).epsilon(1e-9));
        CHECK(n.z == doctest::Approx(want.z).epsilon(1e-9));
    }
}

TEST_CASE("sphere init stores the analytic SDF and prunes far tiles") {
    GridConfig cfg = small_cfg();
    const Vec3 c{-0.3, -0.3, -0.3};
    const double r = 0.1;
    SparseGrid g = init_grid_sphere(cfg, c, r);
    CHECK(g.tiles.size() > 0);
    CHECK(g.tiles.size() < 8); // 32^3 has 8 tiles; the far corner tiles prune
    for (const Tile& t : g.tiles)
        for (int i = 0; i < 20; ++i) {
            const int x = i % kTileEdge, y = (i * 7) % kTileEdge, z = (i * 3) % kTileEdge;
            const Vec3 p = g.voxel_center(t.coords.x * kTileEdge + x, t.coords.y * kTileEdge + y,
                                          t.coords.z * kTileEdge + z);
            CHECK(t.raw_sdf[voxel_index(x, y, z)] ==
                  doctest::Approx((p - c).norm() - r).epsilon(1e-14));
        }
    // Outside every allocated tile the lookup reports the far-field value.
    CHECK(g.raw_value(-5, -5, -5) == doctest::Approx(g.far_field()));
}

TEST_CASE("tri-plane sampling matches a product-of-bilinears oracle") {
    GridConfig cfg = small_cfg();
    SparseGrid g = init_grid_sphere(cfg, {0, 0, 0}, 0.3);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uni(0.2, 1.8);
    Tile& t = g.tiles[0];
    for (double& v : t.plane_x) v = uni(rng);
    for (double& v : t.plane_y) v = uni(rng);
    for (double& v : t.plane_z) v = uni(rng);

    // Independent bilinear lookup with the texel-center + clamp convention.
    auto bilerp = [&](const std::vector<double>& plane, double la, double lb, int k) {
        auto tap = [](double l, int& i0, double& f) {
            double u = std::clamp(l - 0.5, 0.0, kTileEdge - 1.0);
            i0 = std::min(static_cast<int>(u), kTileEdge - 2);
            f = u - i0;
        };
        int a0, b0;
        double fa, fb;
        tap(la, a0, fa);
        tap(lb, b0, fb);
        auto at = [&](int a, int b) { return plane[plane_index(a, b, g.n_s, k)]; };
        return (1 - fa) * ((1 - fb) * at(a0, b0) + fb * at(a0, b0 + 1)) +
               fa * ((1 - fb) * at(a0 + 1, b0) + fb * at(a0 + 1, b0 + 1));
    };

    std::uniform_real_distribution<double> pos(0.0, 16.0);
    std::vector<double> fs(g.n_s);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 local{pos(rng), pos(rng), pos(rng)};
        g.sample_spatial_features(t, local, fs.data());
        for (int k = 0; k < g.n_s; ++k) {
            const double want = bilerp(t.plane_x, local.y, local.z, k) *
                                bilerp(t.plane_y, local.x, local.z, k) *
                                bilerp(t.plane_z, local.x, local.y, k);
            CHECK(fs[k] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("tri-plane backward matches finite differences") {
    GridConfig cfg = small_cfg();
    SparseGrid g = init_grid_sphere(cfg, {0, 0, 0}, 0.3);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uni(0.2, 1.8);
    Tile& t = g.tiles[0];
    for (double& v : t.plane_x) v = uni(rng);
    for (double& v : t.plane_y) v = uni(rng);
    for (double& v : t.plane_z) v = uni(rng);
    const Vec3 local{3.7, 11.2, 6.9};
    const std::vector<double> gfs{0.8, -1.3};

    auto loss = [&]() {
        std::vector<double> fs(g.n_s);
        g.sample_spatial_features(t, local, fs.data());
        double L = 0.0;
        for (int k = 0; k < g.n_s; ++k) L += gfs[k] * fs[k];
        return L;
    };
    std::vector<double> gx(t.plane_x.size(), 0.0), gy(gx), gz(gx);
    g.spatial_features_backward(t, local, gfs.data(), gx.data(), gy.data(), gz.data());

    const double h = 1e-6;
    auto check_plane = [&](std::vector<double>& plane, const std::vector<double>& grad) {
        for (size_t i = 0; i < plane.size(); i += 37) {
            const double saved = plane[i];
            plane[i] = saved + h;
            const double up = loss();
            plane[i] = saved - h;
            const double down = loss();
            plane[i] = saved;
            CHECK(std::abs((up - down) / (2 * h) - grad[i]) < 1e-7);
        }
    };
    check_plane(t.plane_x, gx);
    check_plane(t.plane_y, gy);
    check_plane(t.plane_z, gz);
}

TEST_CASE("subdivide halves the voxel size and reproduces linear SDFs exactly") {
    GridConfig cfg = small_cfg();
    const Vec3 a{0.5, 0.3, -0.6};
    SparseGrid g = dense_grid(cfg, [&](const Vec3& p) { return a.dot(p); });
    // Constant planes and probes must survive subdivision unchanged.
    for (Tile& t : g.tiles) {
        for (double& v : t.plane_x) v = 0.75;
        for (double& v : t.plane_y) v = 0.75;
        for (double& v : t.plane_z) v = 0.75;
    }
    for (ProbeSH& p : g.probes)
        for (size_t i = 0; i < p.coeffs.size(); ++i) p.coeffs[i] = 0.1 * (i % 5);
    g.smooth_all();
    g.band_voxels = 6; // dense parent, but the child level prunes normally

    SparseGrid f = g.subdivide();
    CHECK(f.voxel_size == doctest::Approx(g.voxel_size * 0.5));
    CHECK(f.resolution.x == 64);
    CHECK(f.lod == g.lod + 1);
    int checked = 0;
    for (const Tile& t : f.tiles) {
        // Tiles whose nearest parent voxels touch the sparse boundary see the
        // far-field clamp; the plane slab through the origin is interior.
        for (int x = 0; x < kTileEdge; ++x)
            for (int y = 0; y < kTileEdge; ++y)
                for (int z = 0; z < kTileEdge; ++z) {
                    const Vec3 p = f.voxel_center(t.coords.x * kTileEdge + x,
                                                  t.coords.y * kTileEdge + y,
                                                  t.coords.z * kTileEdge + z);
                    if (std::abs(p.x) > 0.4 || std::abs(p.y) > 0.4 || std::abs(p.z) > 0.4)
                        continue;
                    CHECK(t.raw_sdf[voxel_index(x, y, z)] ==
                          doctest::Approx(a.dot(p)).epsilon(1e-10));
                    ++checked;
                }
        for (double v : t.plane_x) CHECK(v == doctest::Approx(0.75).epsilon(1e-12));
    }
    CHECK(checked > 1000);
    for (const ProbeSH& p : f.probes)
        for (size_t i = 0; i < p.coeffs.size(); ++i)
            CHECK(p.coeffs[i] == doctest::Approx(0.1 * (i % 5)).epsilon(1e-12));
    // Only tiles near the zero crossing survive.
    CHECK(f.tiles.size() < 64u);
}

TEST_CASE("raise_sh_order preserves the probe function and rejects decreases") {
    GridConfig cfg = small_cfg();
    SparseGrid g = init_grid_sphere(cfg, {0, 0, 0}, 0.3);
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (ProbeSH& p : g.probes)
        for (double& c : p.coeffs) c = uni(rng);
    const ProbeSH before = g.probes[0];
    std::vector<Vec3> dirs;
    for (int i = 0; i < 50; ++i) {
        Vec3 d{uni(rng), uni(rng), uni(rng)};
        if (d.norm() > 1e-3) dirs.push_back(d.normalized());
    }
    std::vector<double> fa_before(dirs.size() * g.n_a);
    for (size_t i = 0; i < dirs.size(); ++i)
        eval_probe(before, dirs[i], g.sh_order, &fa_before[i * g.n_a]);

    g.raise_sh_order(4);
    CHECK(g.sh_order == 4);
    CHECK(static_cast<int>(g.probes[0].coeffs.size()) == 16 * g.n_a);
    std::vector<double> fa(g.n_a);
    for (size_t i = 0; i < dirs.size(); ++i) {
        eval_probe(g.probes[0], dirs[i], 4, fa.data());
        for (int k = 0; k < g.n_a; ++k)
            CHECK(fa[k] == doctest::Approx(fa_before[i * g.n_a + k]).epsilon(1e-13));
    }
    CHECK_THROWS_AS(g.raise_sh_order(2), std::invalid_argument);
}

TEST_CASE("probe to spatial parameter ratio is exactly 8*16/(3*16*16) at order 4") {
    GridConfig cfg = small_cfg();
    cfg.n_s = 4;
    cfg.n_a = 4;
    cfg.sh_order = 4;
    SparseGrid g = init_grid_sphere(cfg, {0, 0, 0}, 0.3);
    // probe: 8 corners * 16 coeffs * n_a, spatial: 3 planes * 16*16 * n_s.
    CHECK(g.probe_param_count() * 3 * 16 * 16 == g.spatial_param_count() * 8 * 16);
    CHECK(g.spatial_param_count() == g.tiles.size() * 3 * 16 * 16 * 4);
    CHECK(g.probe_param_count() == g.tiles.size() * 8 * 16 * 4);
}

TEST_CASE("visual hull init matches a brute-force distance transform") {
    GridConfig cfg;
    cfg.resolution = {16, 16, 16};
    cfg.voxel_size = 1.0 / 16.0;
    cfg.origin = {-0.5, -0.5, -0.5};
    cfg.band_voxels = 10000;

    std::vector<Camera> cams;
    std::vector<MaskImage> masks;
    const int W = 48, H = 48;
    for (int i = 0; i < 4; ++i) {
        const double ang = i * 1.57079632679;
        const Vec3 pos{1.6 * std::cos(ang), 0.3, 1.6 * std::sin(ang)};
        cams.push_back(make_lookat_camera(i, pos, {0, 0, 0}, {0, 1, 0}, 1.4 * W, 1.4 * H, W, H));
        MaskImage m;
        m.width = W;
        m.height = H;
        m.data.assign(static_cast<size_t>(W) * H, 0);
        for (int v = 0; v < H; ++v)
            for (int u = 0; u < W; ++u) {
                const double du = u - W / 2.0 + 0.5, dv = v - H / 2.0 + 0.5;
                if (du * du + dv * dv < 14.0 * 14.0) m.data[v * W + u] = 255;
            }
        masks.push_back(m);
    }
    SparseGrid g = init_grid_visual_hull(cfg, cams, masks);

    // Recompute occupancy with the same projection rule, then brute-force the
    // two euclidean distance fields the signed initialization is built from.
    const Vec3i res = cfg.resolution;
    auto idx = [&](int x, int y, int z) {
        return (static_cast<size_t>(x) * res.y + y) * res.z + z;
    };
    std::vector<uint8_t> occ(static_cast<size_t>(res.x) * res.y * res.z, 1);
    for (int x = 0; x < res.x; ++x)
        for (int y = 0; y < res.y; ++y)
            for (int z = 0; z < res.z; ++z) {
                const Vec3 p = cfg.origin + Vec3(x + 0.5, y + 0.5, z + 0.5) * cfg.voxel_size;
                for (size_t c = 0; c < cams.size(); ++c) {
                    double u, v;
                    if (!cams[c].project(p, u, v) ||
                        !masks[c].foreground(static_cast<int>(std::lround(u)),
                                             static_cast<int>(std::lround(v)))) {
                        occ[idx(x, y, z)] = 0;
                        break;
                    }
                }
            }
    size_t n_occ = 0;
    for (uint8_t o : occ) n_occ += o;
    CHECK(n_occ > 100u);
    CHECK(n_occ < occ.size());

    auto brute_sq = [&](int x, int y, int z, uint8_t target) {
        double best = 1e18;
        for (int i = 0; i < res.x; ++i)
            for (int j = 0; j < res.y; ++j)
                for (int k = 0; k < res.z; ++k)
                    if (occ[idx(i, j, k)] == target) {
                        const double d2 = double(i - x) * (i - x) + double(j - y) * (j - y) +
                                          double(k - z) * (k - z);
                        best = std::min(best, d2);
                    }
        return best;
    };
    const double max_s = 16 * cfg.voxel_size;
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 60; ++trial) {
        const int x = rng() % res.x, y = rng() % res.y, z = rng() % res.z;
        const double want = std::clamp((std::sqrt(std::min(brute_sq(x, y, z, 1), 1e12)) -
                                        std::sqrt(std::min(brute_sq(x, y, z, 0), 1e12))) *
                                           cfg.voxel_size,
                                       -max_s, max_s);
        CHECK(g.raw_value(x, y, z) == doctest::Approx(want).epsilon(1e-9));
    }
}
