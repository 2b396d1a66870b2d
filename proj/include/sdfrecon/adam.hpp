#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace sdfrecon {

// Bias-corrected Adam for one flat parameter tensor. Moments live here; the
// parameters live wherever the caller keeps them.
class AdamState {
public:
    double beta1 = 0.9;
    double beta2 = 0.995;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(size_t n) { resize(n); }

    void resize(size_t n) {
        m_.assign(n, 0.0);
        v_.assign(n, 0.0);
    }

    size_t size() const { return m_.size(); }

    // One update; `lr` may change between calls (the schedule owns it).
    void step(double* params, const double* grads, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1, t_);
        const double c2 = 1.0 - std::pow(beta2, t_);
        for (size_t i = 0; i < m_.size(); ++i) {
            m_[i] = beta1 * m_[i] + (1.0 - beta1) * grads[i];
            v_[i] = beta2 * v_[i] + (1.0 - beta2) * grads[i] * grads[i];
            params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
        }
    }

private:
    std::vector<double> m_, v_;
    long t_ = 0;
};

} // namespace sdfrecon
