#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sdfrecon/checkpoint.hpp"
#include "sdfrecon/losses.hpp"
#include "sdfrecon/renderer.hpp"
#include "sdfrecon/synth.hpp"
#include "sdfrecon/trainer.hpp"

using namespace sdfrecon;
namespace fs = std::filesystem;

namespace {

AnalyticScene test_scene() {
    AnalyticScene sc;
    Primitive p;
    p.kind = Primitive::Kind::Sphere;
    p.extent = {0.3, 0.3, 0.3};
    p.material.albedo = {0.55, 0.3, 0.2};
    p.material.r0 = 0.08;
    sc.primitives.push_back(p);
    Light l;
    l.kind = Light::Kind::Point;
    l.pos_or_dir = {1.5, 2.0, 1.0};
    l.intensity = {6, 6, 6};
    sc.lights.push_back(l);
    return sc;
}

Checkpoint fresh_checkpoint(uint64_t seed, int res = 32) {
    GridConfig cfg;
    cfg.resolution = {res, res, res};
    cfg.voxel_size = 1.0 / res;
    cfg.origin = {-0.5, -0.5, -0.5};
    cfg.n_s = 2;
    cfg.n_a = 2;
    cfg.sh_order = 2;
    Checkpoint ck;
    ck.grid = init_grid_sphere(cfg, {0, 0, 0}, 0.32);
    ck.mlp = DecoderMlp::glorot_init(cfg.n_s, cfg.n_a, 0, seed);
    ck.seed = seed;
    return ck;
}

TrainSchedule tiny_schedule(int iters) {
    TrainSchedule s;
    s.lambda_photo = 40.0;
    s.camera_bias = false;
    LodSchedule l;
    l.iterations = iters;
    l.images_per_batch = 1;
    l.sh_order = 2;
    l.image_divisor = 4;
    l.lr_voxels = Bracket{2e-3};
    l.lr_mlp = Bracket{2e-3};
    l.lambda_eik = Bracket{0.05};
    l.lambda_sdf = Bracket{0.5};
    l.lambda_features = Bracket{0.01};
    l.lambda_normal = Bracket{0.01};
    l.lambda_probes = Bracket{0.01};
    l.tau = Bracket{30.0, 200.0};
    s.lods = {l};
    return s;
}

bool checkpoints_bitwise_equal(const Checkpoint& a, const Checkpoint& b) {
    if (a.grid.tiles.size() != b.grid.tiles.size()) return false;
    for (size_t t = 0; t < a.grid.tiles.size(); ++t) {
        if (a.grid.tiles[t].raw_sdf != b.grid.tiles[t].raw_sdf) return false;
        if (a.grid.tiles[t].plane_x != b.grid.tiles[t].plane_x) return false;
        if (a.grid.tiles[t].plane_y != b.grid.tiles[t].plane_y) return false;
        if (a.grid.tiles[t].plane_z != b.grid.tiles[t].plane_z) return false;
    }
    if (a.grid.probes.size() != b.grid.probes.size()) return false;
    for (size_t p = 0; p < a.grid.probes.size(); ++p)
        if (a.grid.probes[p].coeffs != b.grid.probes[p].coeffs) return false;
    return a.mlp.w1 == b.mlp.w1 && a.mlp.b1 == b.mlp.b1 && a.mlp.w2 == b.mlp.w2 &&
           a.mlp.b2 == b.mlp.b2 && a.mlp.w3 == b.mlp.w3 && a.mlp.b3 == b.mlp.b3 &&
           a.mlp.camera_bias == b.mlp.camera_bias;
}

} // namespace

TEST_CASE("a zero-iteration schedule leaves the checkpoint bitwise unchanged") {
    const Dataset ds = make_dataset(test_scene(), 3, 32, 2.0, 1);
    Checkpoint ck = fresh_checkpoint(0);
    const Checkpoint before = ck;
    const TrainStats st = train(ds, tiny_schedule(0), ck, nullptr);
    CHECK(st.steps_run == 0);
    CHECK(checkpoints_bitwise_equal(ck, before));
}

TEST_CASE("a short run reduces the photometric loss and logs every step") {
    const Dataset ds = make_dataset(test_scene(), 4, 32, 2.0, 2);
    Checkpoint ck = fresh_checkpoint(0);
    std::ostringstream log;
    const TrainStats st = train(ds, tiny_schedule(60), ck, &log);
    CHECK(st.steps_run == 60);

    // Parse the per-step photo losses out of the log.
    std::istringstream in(log.str());
    std::string line;
    std::vector<double> photo;
    int lines = 0;
    while (std::getline(in, line)) {
        if (line.rfind("step ", 0) != 0) continue;
        ++lines;
        std::istringstream ls(line);
        std::string tok;
        double val = -1;
        while (ls >> tok)
            if (tok == "photo") {
                ls >> val;
                break;
            }
        REQUIRE(val >= 0.0);
        photo.push_back(val);
    }
    CHECK(lines == 60);
    // Compare early-phase and late-phase averages; per-step noise is fine but
    // the trend must go down.
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 10; ++i) head += photo[i];
    for (int i = 50; i < 60; ++i) tail += photo[i];
    CHECK(tail < head);
    CHECK(st.final_psnr > 0.0);
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
    const Dataset ds = make_dataset(test_scene(), 3, 32, 2.0, 3);
    Checkpoint a = fresh_checkpoint(7);
    Checkpoint b = fresh_checkpoint(7);
    const TrainSchedule sched = tiny_schedule(15);
    train(ds, sched, a, nullptr);
    train(ds, sched, b, nullptr);
    CHECK(checkpoints_bitwise_equal(a, b));
    // A different seed must diverge.
    Checkpoint c = fresh_checkpoint(8);
    train(ds, sched, c, nullptr);
    CHECK_FALSE(checkpoints_bitwise_equal(a, c));
}

TEST_CASE("resuming mid-schedule continues from the stored cursor") {
    const Dataset ds = make_dataset(test_scene(), 3, 32, 2.0, 4);
    TrainSchedule sched = tiny_schedule(10);
    // Run 10 iterations in one go...
    Checkpoint whole = fresh_checkpoint(5);
    train(ds, sched, whole, nullptr);
    // Finished state: cursor on the last LOD with all its iterations done.
    CHECK(whole.lod_cursor == 0);
    CHECK(whole.iteration == 10);
    // ...then confirm a finished checkpoint runs zero further steps.
    const Checkpoint after = whole;
    const TrainStats st2 = train(ds, sched, whole, nullptr);
    CHECK(st2.steps_run == 0);
    CHECK(checkpoints_bitwise_equal(whole, after));
}

TEST_CASE("multi-LOD schedules subdivide the grid between levels") {
    const Dataset ds = make_dataset(test_scene(), 3, 32, 2.0, 5);
    TrainSchedule sched = tiny_schedule(3);
    LodSchedule l1 = sched.lods[0];
    l1.sh_order = 3;
    sched.lods.push_back(l1);
    Checkpoint ck = fresh_checkpoint(6);
    const double v0 = ck.grid.voxel_size;
    const TrainStats st = train(ds, sched, ck, nullptr);
    CHECK(st.steps_run == 6);
    CHECK(ck.grid.voxel_size == doctest::Approx(v0 * 0.5));
    CHECK(ck.grid.sh_order == 3);
    CHECK(ck.lod_cursor == 1);
    CHECK(ck.iteration == 3);
}

TEST_CASE("camera bias is allocated when the schedule requests it") {
    const Dataset ds = make_dataset(test_scene(), 3, 32, 2.0, 6);
    TrainSchedule sched = tiny_schedule(2);
    sched.camera_bias = true;
    Checkpoint ck = fresh_checkpoint(9);
    CHECK(ck.mlp.camera_bias.empty());
    train(ds, sched, ck, nullptr);
    CHECK(ck.mlp.camera_bias.size() == 3u * kHidden);
}

TEST_CASE("an empty dataset is rejected with an exception") {
    Dataset empty;
    Checkpoint ck = fresh_checkpoint(1);
    CHECK_THROWS(train(empty, tiny_schedule(5), ck, nullptr));
}
