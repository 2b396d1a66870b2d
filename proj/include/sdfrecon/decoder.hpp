#pragma once

#include <cstdint>
#include <vector>

#include "sdfrecon/vec.hpp"

namespace sdfrecon {

inline constexpr int kHidden = 32;
inline constexpr int kFresnelPowers = 6;
inline constexpr int kMaxDecoderInput = 64;

// 2 hidden layer, 32 neuron ReLU MLP with a sigmoid output. Input is the
// concatenation [F_s | F_a | fresnel powers]. Optional per-camera bias vectors
// are added to the first layer's pre-activation.
struct DecoderMlp {
    int n_s = 0;
    int n_a = 0;
    std::vector<double> w1, b1; // [32][in], [32]
    std::vector<double> w2, b2; // [32][32], [32]
    std::vector<double> w3, b3; // [3][32], [3]
    std::vector<double> camera_bias; // [num_cameras][32]; empty when disabled

    int input_dim() const { return n_s + n_a + kFresnelPowers; }
    int num_cameras() const {
        return camera_bias.empty() ? 0 : static_cast<int>(camera_bias.size()) / kHidden;
    }

    static DecoderMlp glorot_init(int n_s, int n_a, int num_cameras, uint64_t seed);
};

struct MlpGrads {
    std::vector<double> w1, b1, w2, b2, w3, b3, camera_bias;

    void init_like(const DecoderMlp& mlp);
    void clear();
    void add(const MlpGrads& o);
};

// powers[k] = (1 - clamp(n_dot_v, 0, 1))^k for k = 0..5.
void fresnel_powers(double n_dot_v, double out[kFresnelPowers]);

// Forward activations cached for the manual backward pass.
struct DecodeCache {
    double input[kMaxDecoderInput];
    double a1[kHidden], a2[kHidden]; // post-ReLU
    double rgb[3];
};

// camera_id < 0 omits the bias term.
Vec3 decode_color(const DecoderMlp& mlp, const double* f_s, const double* f_a, double n_dot_v,
                  int camera_id, DecodeCache* cache = nullptr);

// Exact reverse mode. Accumulates parameter gradients and returns gradients
// for the inputs; the n_dot_v gradient chains through the six power terms.
void decode_backward(const DecoderMlp& mlp, const DecodeCache& cache, double n_dot_v,
                     int camera_id, const double upstream[3], MlpGrads& grads, double* grad_fs,
                     double* grad_fa, double* grad_ndotv);

} // namespace sdfrecon
