#pragma once

#include <vector>

#include "sdfrecon/camera.hpp"
#include "sdfrecon/decoder.hpp"
#include "sdfrecon/grads.hpp"
#include "sdfrecon/grid.hpp"
#include "sdfrecon/image.hpp"

namespace sdfrecon {

struct RenderOptions {
    double tau = 100.0;
    int n_max = 512;
    double early_stop_transmittance = 1e-4; // 0 disables early ray termination
    Vec3 background{0, 0, 0};
    int camera_id = -1; // per-camera bias lookup; -1 omits the bias

    // View-time ablation switches; never mutate parameters.
    bool no_spatial = false;        // F_s := 0
    bool no_angular = false;        // F_a := 0 (probes skipped entirely)
    bool no_fresnel = false;        // n.v := 1
    int sh_order_override = -1;     // truncate probes to a lower order

    bool need_colors = true; // false: alpha-only rays (mask supervision)
};

// NeuS opacity from two consecutive SDF samples.
// alpha = max((Phi(s_i) - Phi(s_next)) / Phi(s_i), 0), Phi(x) = sigmoid(tau x).
double alpha_from_sdf(double s_i, double s_next, double tau);

// Front-to-back compositing; returns accumulated opacity.
Vec3 composite(const std::vector<double>& alphas, const std::vector<Vec3>& colors,
               double* accumulated_alpha);

// Fixed-step sample distances along the ray (one voxel spacing), restricted to
// allocated tiles via tile-level skipping; at most n_max entries.
std::vector<double> march_ray(const SparseGrid& grid, const Vec3& origin, const Vec3& dir,
                              int n_max);

// Per-sample state cached by the forward pass for the manual backward pass.
struct RaySample {
    double t = 0.0;
    Vec3 pos;
    double sdf = 0.0;
    double alpha = 0.0;
    double trans = 1.0; // T_i
    double weight = 0.0;
    bool shaded = false;
    Vec3 color;
    // shading chain caches
    int tile = -1;
    Vec3 local;            // tile-local position in voxel units
    Vec3 grad_vec;         // unnormalized SDF gradient
    double grad_len = 0.0;
    bool degenerate = false;
    Vec3 normal, view, refl;
    double n_dot_v = 0.0;
    DecodeCache dec;
    std::vector<double> f_s, f_a;
};

struct RayWorkspace {
    std::vector<RaySample> samples;
    double sdf_extra = 0.0; // SDF one step past the last sample
    Vec3 pos_extra;
    bool has_extra = false;
};

struct RayResult {
    Vec3 color;   // composited, background applied
    double acc_alpha = 0.0;
    double trans_end = 1.0;
};

// Evaluates the spatial features, reflected-vector probe lookup, Fresnel
// powers and the decoder for one sample position in one pass.
Vec3 decode_fused(const SparseGrid& grid, const DecoderMlp& mlp, const Tile& tile,
                  const Vec3& pos, const Vec3& view_to_camera, const RenderOptions& opt,
                  RaySample* cache = nullptr);

RayResult render_ray(const SparseGrid& grid, const DecoderMlp& mlp, const Vec3& origin,
                     const Vec3& dir, const RenderOptions& opt, RayWorkspace& ws);

// Reverse mode for render_ray. upstream_color is dL/d(final pixel color);
// upstream_alpha is dL/d(accumulated opacity) in addition to the background
// compositing term.
void render_ray_backward(const SparseGrid& grid, const DecoderMlp& mlp, const RenderOptions& opt,
                         const RayWorkspace& ws, const Vec3& upstream_color, double upstream_alpha,
                         GradBuffers& gb);

struct RenderedImage {
    ImageRGB color;
    ImageGray alpha;
};

RenderedImage render_image(const SparseGrid& grid, const DecoderMlp& mlp, const Camera& camera,
                           const RenderOptions& opt);

} // namespace sdfrecon
