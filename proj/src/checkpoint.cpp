#include "sdfrecon/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace sdfrecon {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'F', 'C'};
constexpr uint32_t kVersion = 1;

struct Writer {
    std::ofstream f;
    explicit Writer(const std::string& path) : f(path, std::ios::binary) {
        if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    }
    template <typename T> void pod(const T& v) { f.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
    void f32_tensor(const std::vector<double>& v) {
        std::vector<float> tmp(v.begin(), v.end());
        uint64_t n = tmp.size();
        pod(n);
        f.write(reinterpret_cast<const char*>(tmp.data()), n * sizeof(float));
    }
};

struct Reader {
    std::ifstream f;
    std::string path;
    explicit Reader(const std::string& p) : f(p, std::ios::binary), path(p) {
        if (!f) throw std::runtime_error("checkpoint: cannot open: " + p);
    }
    template <typename T> void pod(T& v) {
        f.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!f) throw std::runtime_error("checkpoint: truncated file: " + path);
    }
    void f32_tensor(std::vector<double>& out, uint64_t expected) {
        uint64_t n = 0;
        pod(n);
        if (n != expected)
            throw std::runtime_error("checkpoint: tensor size mismatch in " + path);
        std::vector<float> tmp(n);
        f.read(reinterpret_cast<char*>(tmp.data()), n * sizeof(float));
        if (!f) throw std::runtime_error("checkpoint: truncated file: " + path);
        out.assign(tmp.begin(), tmp.end());
    }
};

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    Writer w(path);
    w.f.write(kMagic, 4);
    w.pod(kVersion);

    const SparseGrid& g = ckpt.grid;
    w.pod(g.voxel_size);
    w.pod(g.origin);
    w.pod(g.far_field_voxels);
    int32_t ints[8] = {g.resolution.x, g.resolution.y, g.resolution.z, g.n_s,
                       g.n_a,          g.sh_order,     g.lod,          g.band_voxels};
    w.pod(ints);

    const uint32_t n_tiles = static_cast<uint32_t>(g.tiles.size());
    w.pod(n_tiles);
    for (const Tile& t : g.tiles) {
        int32_t c[3] = {t.coords.x, t.coords.y, t.coords.z};
        w.pod(c);
    }
    for (const Tile& t : g.tiles) {
        w.f32_tensor(t.raw_sdf);
        w.f32_tensor(t.plane_x);
        w.f32_tensor(t.plane_y);
        w.f32_tensor(t.plane_z);
    }
    const uint32_t n_probes = static_cast<uint32_t>(g.probes.size());
    w.pod(n_probes);
    for (uint32_t i = 0; i < n_probes; ++i) {
        int32_t c[3] = {g.probe_coords[i].x, g.probe_coords[i].y, g.probe_coords[i].z};
        w.pod(c);
        w.f32_tensor(g.probes[i].coeffs);
    }

    const DecoderMlp& m = ckpt.mlp;
    int32_t mints[3] = {m.n_s, m.n_a, m.num_cameras()};
    w.pod(mints);
    w.f32_tensor(m.w1);
    w.f32_tensor(m.b1);
    w.f32_tensor(m.w2);
    w.f32_tensor(m.b2);
    w.f32_tensor(m.w3);
    w.f32_tensor(m.b3);
    w.f32_tensor(m.camera_bias);

    int32_t lod_cursor = ckpt.lod_cursor;
    w.pod(lod_cursor);
    w.pod(ckpt.iteration);
    w.pod(ckpt.seed);
    if (!w.f) throw std::runtime_error("checkpoint: failed while writing: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.f.read(magic, 4);
    if (!r.f || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    uint32_t version = 0;
    r.pod(version);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) +
                                 " in " + path);

    Checkpoint ckpt;
    SparseGrid& g = ckpt.grid;
    r.pod(g.voxel_size);
    r.pod(g.origin);
    r.pod(g.far_field_voxels);
    int32_t ints[8];
    r.pod(ints);
    g.resolution = {ints[0], ints[1], ints[2]};
    g.n_s = ints[3];
    g.n_a = ints[4];
    g.sh_order = ints[5];
    g.lod = ints[6];
    g.band_voxels = ints[7];

    uint32_t n_tiles = 0;
    r.pod(n_tiles);
    std::vector<Vec3i> tile_coords(n_tiles);
    for (uint32_t i = 0; i < n_tiles; ++i) {
        int32_t c[3];
        r.pod(c);
        tile_coords[i] = {c[0], c[1], c[2]};
        g.allocate_tile(c[0], c[1], c[2]);
    }
    const uint64_t plane_sz = static_cast<uint64_t>(kTileEdge) * kTileEdge * g.n_s;
    for (uint32_t i = 0; i < n_tiles; ++i) {
        Tile& t = g.tiles[i];
        r.f32_tensor(t.raw_sdf, kTileVoxels);
        r.f32_tensor(t.plane_x, plane_sz);
        r.f32_tensor(t.plane_y, plane_sz);
        r.f32_tensor(t.plane_z, plane_sz);
    }
    uint32_t n_probes = 0;
    r.pod(n_probes);
    if (n_probes != g.probes.size())
        throw std::runtime_error("checkpoint: probe table inconsistent with tiles in " + path);
    const uint64_t probe_sz = static_cast<uint64_t>(g.sh_order) * g.sh_order * g.n_a;
    for (uint32_t i = 0; i < n_probes; ++i) {
        int32_t c[3];
        r.pod(c);
        const int pi = g.probe_index(c[0], c[1], c[2]);
        if (pi < 0) throw std::runtime_error("checkpoint: unknown probe coordinate in " + path);
        r.f32_tensor(g.probes[pi].coeffs, probe_sz);
    }
    g.smooth_all();

    DecoderMlp& m = ckpt.mlp;
    int32_t mints[3];
    r.pod(mints);
    m.n_s = mints[0];
    m.n_a = mints[1];
    const int in = m.input_dim();
    r.f32_tensor(m.w1, static_cast<uint64_t>(kHidden) * in);
    r.f32_tensor(m.b1, kHidden);
    r.f32_tensor(m.w2, static_cast<uint64_t>(kHidden) * kHidden);
    r.f32_tensor(m.b2, kHidden);
    r.f32_tensor(m.w3, 3 * kHidden);
    r.f32_tensor(m.b3, 3);
    r.f32_tensor(m.camera_bias, static_cast<uint64_t>(mints[2]) * kHidden);

    int32_t lod_cursor = 0;
    r.pod(lod_cursor);
    ckpt.lod_cursor = lod_cursor;
    r.pod(ckpt.iteration);
    r.pod(ckpt.seed);
    return ckpt;
}

} // namespace sdfrecon
