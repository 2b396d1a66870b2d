#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace sdfrecon {

// Value pair interpolated over one LOD's iterations: exactly `a` at iteration
// 0 and `b` at iteration n-1.
struct Bracket {
    double a = 0.0, b = 0.0;

    Bracket() = default;
    Bracket(double v) : a(v), b(v) {}
    Bracket(double a_, double b_) : a(a_), b(b_) {}

    double at(int it, int total) const {
        if (total <= 1) return a;
        const double t = static_cast<double>(it) / (total - 1);
        return a + (b - a) * t;
    }

    // Geometric interpolation (used by the sharpness parameter tau).
    double at_geometric(int it, int total) const {
        if (total <= 1) return a;
        const double t = static_cast<double>(it) / (total - 1);
        return a * std::pow(b / a, t);
    }
};

struct LodSchedule {
    int iterations = 0;
    int images_per_batch = 1;
    int sh_order = 2;
    int image_divisor = 1;
    Bracket lr_voxels{1e-2};
    Bracket lr_mlp{1e-3};
    Bracket lambda_eik{0.1};
    Bracket lambda_sdf{1.0};
    Bracket lambda_features{0.01};
    Bracket lambda_normal{0.01};
    Bracket lambda_probes{0.01};
    Bracket tau{30.0, 3000.0}; // in units of 1/voxel_size, geometric growth
};

struct TrainSchedule {
    double lambda_photo = 40.0;
    bool camera_bias = false;
    std::vector<LodSchedule> lods;

    static TrainSchedule from_json_text(const std::string& text);
    static TrainSchedule load(const std::string& path);
    std::string to_json_text() const;
};

// Learning-rate warm-up factor for the first 50 iterations of each LOD.
inline double warmup_scale(int it) {
    return it < 50 ? (it + 1) / 50.0 : 1.0;
}

} // namespace sdfrecon
