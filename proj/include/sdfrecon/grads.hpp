#pragma once

#include <vector>

#include "sdfrecon/decoder.hpp"
#include "sdfrecon/grid.hpp"

namespace sdfrecon {

// Gradient accumulators mirroring the trainable state of a SparseGrid plus the
// decoder. Gradients with respect to the smoothed SDF are staged in smooth_sdf
// and folded into raw_sdf by finalize_smooth_grads (transpose of the Gaussian).
struct GradBuffers {
    std::vector<std::vector<double>> raw_sdf;    // per tile, 16^3
    std::vector<std::vector<double>> smooth_sdf; // per tile, 16^3
    std::vector<std::vector<double>> plane_x, plane_y, plane_z;
    std::vector<std::vector<double>> probes; // per pool probe, l^2 * n_a
    MlpGrads mlp;

    void init(const SparseGrid& grid, const DecoderMlp& decoder);
    void clear();
    void add(const GradBuffers& o);
};

// Trilinear scatter of a gradient with respect to the smoothed SDF at world
// point p. Voxels outside allocated tiles are far-field constants and receive
// nothing.
void scatter_smooth_grad(const SparseGrid& grid, GradBuffers& gb, const Vec3& p, double g);

// raw_sdf += G^T * smooth_sdf (then smooth_sdf stays as-is; callers clear).
void finalize_smooth_grads(const SparseGrid& grid, GradBuffers& gb);

} // namespace sdfrecon
