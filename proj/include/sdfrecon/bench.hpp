#pragma once

#include <string>
#include <vector>

#include "sdfrecon/decoder.hpp"
#include "sdfrecon/grid.hpp"
#include "sdfrecon/renderer.hpp"

namespace sdfrecon {

// Per-stage timings for one camera: "shading" is the fused feature+decoder
// evaluation over the surface samples of the frame; "render" is the full
// frame (marching, alpha compositing, shading).
struct BenchRow {
    std::string name; // Full / w/o F_s / w/o F_a / MLP-only
    double shading_ms = 0.0;
    double render_ms = 0.0;
};

struct BenchReport {
    int threads = 1;
    long shaded_samples = 0;
    std::vector<BenchRow> rows;
};

BenchReport run_bench(const SparseGrid& grid, const DecoderMlp& mlp, const Camera& camera,
                      double tau, int threads);

} // namespace sdfrecon
