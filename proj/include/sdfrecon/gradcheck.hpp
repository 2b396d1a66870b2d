#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdfrecon {

// Finite-difference audit of the full training gradient on a tiny scene
// (8 tiles, one 4x4 view). For each parameter class a random subset of
// parameters is perturbed by +-h and the central difference of the weighted
// total loss is compared against the analytic gradient.
struct GradCheckReport {
    struct ClassResult {
        std::string name;
        int checked = 0;
        double max_rel_err = 0.0;
        bool pass = false;
    };
    std::vector<ClassResult> classes;
    bool pass = false;
};

GradCheckReport run_gradcheck(uint64_t seed, double h = 1e-4, double tol = 1e-4,
                              int samples_per_class = 100);

} // namespace sdfrecon
