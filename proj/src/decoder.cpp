#include "sdfrecon/decoder.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sdfrecon {

DecoderMlp DecoderMlp::glorot_init(int n_s, int n_a, int num_cameras, uint64_t seed) {
    DecoderMlp m;
    m.n_s = n_s;
    m.n_a = n_a;
    const int in = m.input_dim();
    if (in > kMaxDecoderInput) throw std::invalid_argument("decoder input too wide");
    std::mt19937_64 rng(seed);
    auto fill = [&](std::vector<double>& w, int fan_in, int fan_out, size_t count) {
        double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        w.resize(count);
        for (auto& v : w) v = dist(rng);
    };
    fill(m.w1, in, kHidden, static_cast<size_t>(kHidden) * in);
    m.b1.assign(kHidden, 0.0);
    fill(m.w2, kHidden, kHidden, static_cast<size_t>(kHidden) * kHidden);
    m.b2.assign(kHidden, 0.0);
    fill(m.w3, kHidden, 3, 3ull * kHidden);
    m.b3.assign(3, 0.0);
    if (num_cameras > 0) m.camera_bias.assign(static_cast<size_t>(num_cameras) * kHidden, 0.0);
    return m;
}

void MlpGrads::init_like(const DecoderMlp& mlp) {
    w1.assign(mlp.w1.size(), 0.0);
    b1.assign(mlp.b1.size(), 0.0);
    w2.assign(mlp.w2.size(), 0.0);
    b2.assign(mlp.b2.size(), 0.0);
    w3.assign(mlp.w3.size(), 0.0);
    b3.assign(mlp.b3.size(), 0.0);
    camera_bias.assign(mlp.camera_bias.size(), 0.0);
}

void MlpGrads::clear() {
    auto z = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
    z(w1); z(b1); z(w2); z(b2); z(w3); z(b3); z(camera_bias);
}

void MlpGrads::add(const MlpGrads& o) {
    auto acc = [](std::vector<double>& a, const std::vector<double>& b) {
        for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    acc(w1, o.w1); acc(b1, o.b1); acc(w2, o.w2); acc(b2, o.b2); acc(w3, o.w3); acc(b3, o.b3);
    acc(camera_bias, o.camera_bias);
}

void fresnel_powers(double n_dot_v, double out[kFresnelPowers]) {
    const double u = 1.0 - clampd(n_dot_v, 0.0, 1.0);
    out[0] = 1.0;
    for (int k = 1; k < kFresnelPowers; ++k) out[k] = out[k - 1] * u;
}

Vec3 decode_color(const DecoderMlp& mlp, const double* f_s, const double* f_a, double n_dot_v,
                  int camera_id, DecodeCache* cache) {
    const int in = mlp.input_dim();
    double input[kMaxDecoderInput];
    for (int i = 0; i < mlp.n_s; ++i) input[i] = f_s[i];
    for (int i = 0; i < mlp.n_a; ++i) input[mlp.n_s + i] = f_a[i];
    fresnel_powers(n_dot_v, input + mlp.n_s + mlp.n_a);

    const double* cam = nullptr;
    if (camera_id >= 0) {
        if (mlp.camera_bias.empty()) {
            // bias disabled: camera id is ignored
        } else if (camera_id >= mlp.num_cameras()) {
            throw std::out_of_range("decode_color: camera id out of range");
        } else {
            cam = mlp.camera_bias.data() + static_cast<size_t>(camera_id) * kHidden;
        }
    }

    double a1[kHidden], a2[kHidden];
    for (int j = 0; j < kHidden; ++j) {
        double z = mlp.b1[j] + (cam ? cam[j] : 0.0);
        const double* row = mlp.w1.data() + static_cast<size_t>(j) * in;
        for (int i = 0; i < in; ++i) z += row[i] * input[i];
        a1[j] = z > 0.0 ? z : 0.0;
    }
    for (int j = 0; j < kHidden; ++j) {
        double z = mlp.b2[j];
        const double* row = mlp.w2.data() + static_cast<size_t>(j) * kHidden;
        for (int i = 0; i < kHidden; ++i) z += row[i] * a1[i];
        a2[j] = z > 0.0 ? z : 0.0;
    }
    double rgb[3];
    for (int j = 0; j < 3; ++j) {
        double z = mlp.b3[j];
        const double* row = mlp.w3.data() + static_cast<size_t>(j) * kHidden;
        for (int i = 0; i < kHidden; ++i) z += row[i] * a2[i];
        rgb[j] = 1.0 / (1.0 + std::exp(-z));
    }
    if (cache) {
        for (int i = 0; i < in; ++i) cache->input[i] = input[i];
        for (int i = 0; i < kHidden; ++i) {
            cache->a1[i] = a1[i];
            cache->a2[i] = a2[i];
        }
        for (int i = 0; i < 3; ++i) cache->rgb[i] = rgb[i];
    }
    return {rgb[0], rgb[1], rgb[2]};
}

void decode_backward(const DecoderMlp& mlp, const DecodeCache& cache, double n_dot_v,
                     int camera_id, const double upstream[3], MlpGrads& grads, double* grad_fs,
                     double* grad_fa, double* grad_ndotv) {
    const int in = mlp.input_dim();
    double dz3[3];
    for (int j = 0; j < 3; ++j) {
        const double y = cache.rgb[j];
        dz3[j] = upstream[j] * y * (1.0 - y); // sigmoid'
    }
    double da2[kHidden] = {};
    for (int j = 0; j < 3; ++j) {
        const double* row = mlp.w3.data() + static_cast<size_t>(j) * kHidden;
        double* grow = grads.w3.data() + static_cast<size_t>(j) * kHidden;
        for (int i = 0; i < kHidden; ++i) {
            grow[i] += dz3[j] * cache.a2[i];
            da2[i] += dz3[j] * row[i];
        }
        grads.b3[j] += dz3[j];
    }
    double da1[kHidden] = {};
    for (int j = 0; j < kHidden; ++j) {
        if (cache.a2[j] <= 0.0) continue;
        const double dz = da2[j];
        const double* row = mlp.w2.data() + static_cast<size_t>(j) * kHidden;
        double* grow = grads.w2.data() + static_cast<size_t>(j) * kHidden;
        for (int i = 0; i < kHidden; ++i) {
            grow[i] += dz * cache.a1[i];
            da1[i] += dz * row[i];
        }
        grads.b2[j] += dz;
    }
    double dinput[kMaxDecoderInput] = {};
    double* gcam = nullptr;
    if (camera_id >= 0 && !grads.camera_bias.empty() && camera_id < mlp.num_cameras())
        gcam = grads.camera_bias.data() + static_cast<size_t>(camera_id) * kHidden;
    for (int j = 0; j < kHidden; ++j) {
        if (cache.a1[j] <= 0.0) continue;
        const double dz = da1[j];
        const double* row = mlp.w1.data() + static_cast<size_t>(j) * in;
        double* grow = grads.w1.data() + static_cast<size_t>(j) * in;
        for (int i = 0; i < in; ++i) {
            grow[i] += dz * cache.input[i];
            dinput[i] += dz * row[i];
        }
        grads.b1[j] += dz;
        if (gcam) gcam[j] += dz;
    }
    if (grad_fs)
        for (int i = 0; i < mlp.n_s; ++i) grad_fs[i] += dinput[i];
    if (grad_fa)
        for (int i = 0; i < mlp.n_a; ++i) grad_fa[i] += dinput[mlp.n_s + i];
    if (grad_ndotv) {
        // powers[k] = u^k with u = 1 - clamp(n_dot_v, 0, 1); du/d(n_dot_v) is
        // -1 inside [0,1] (boundaries included), 0 outside.
        if (n_dot_v >= 0.0 && n_dot_v <= 1.0) {
            const double u = 1.0 - n_dot_v;
            double du = 0.0;
            double up = 1.0; // u^(k-1)
            for (int k = 1; k < kFresnelPowers; ++k) {
                du += dinput[mlp.n_s + mlp.n_a + k] * k * up;
                up *= u;
            }
            *grad_ndotv += -du;
        }
    }
}

} // namespace sdfrecon
