#include "sdfrecon/sh.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace sdfrecon {

namespace {

// Orthonormalization constants for the real basis, band-major.
constexpr double k0 = 0.28209479177387814; // 1/(2 sqrt(pi))
constexpr double k1 = 0.4886025119029199;  // sqrt(3/(4 pi))
constexpr double k2a = 1.0925484305920792; // sqrt(15/(4 pi))
constexpr double k2b = 0.31539156525252005; // sqrt(5/(16 pi))
constexpr double k2c = 0.5462742152960396; // sqrt(15/(16 pi))
constexpr double k3a = 0.5900435899266435; // sqrt(35/(32 pi))
constexpr double k3b = 2.890611442640554;  // sqrt(105/(4 pi))
constexpr double k3c = 0.4570457994644658; // sqrt(21/(32 pi))
constexpr double k3d = 0.3731763325901154; // sqrt(7/(16 pi))
constexpr double k3e = 1.445305721320277;  // sqrt(105/(16 pi))

void check_order(int order) {
    if (order < 1 || order > kMaxShOrder)
        throw std::invalid_argument("SH order must be in [1,4]");
}

} // namespace

void eval_sh_basis(const Vec3& dir, int order, double* out) {
    check_order(order);
    if (std::abs(dir.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("eval_sh_basis: direction must be unit length");
    const double x = dir.x, y = dir.y, z = dir.z;
    out[0] = k0;
    if (order == 1) return;
    out[1] = k1 * y;
    out[2] = k1 * z;
    out[3] = k1 * x;
    if (order == 2) return;
    out[4] = k2a * x * y;
    out[5] = k2a * y * z;
    out[6] = k2b * (3.0 * z * z - 1.0);
    out[7] = k2a * x * z;
    out[8] = k2c * (x * x - y * y);
    if (order == 3) return;
    out[9] = k3a * y * (3.0 * x * x - y * y);
    out[10] = k3b * x * y * z;
    out[11] = k3c * y * (5.0 * z * z - 1.0);
    out[12] = k3d * z * (5.0 * z * z - 3.0);
    out[13] = k3c * x * (5.0 * z * z - 1.0);
    out[14] = k3e * z * (x * x - y * y);
    out[15] = k3a * x * (x * x - 3.0 * y * y);
}

void eval_sh_basis_grad(const Vec3& dir, int order, double grad[kMaxShCoeffs][3]) {
    check_order(order);
    const double x = dir.x, y = dir.y, z = dir.z;
    auto set = [&](int j, double gx, double gy, double gz) {
        grad[j][0] = gx;
        grad[j][1] = gy;
        grad[j][2] = gz;
    };
    set(0, 0, 0, 0);
    if (order == 1) return;
    set(1, 0, k1, 0);
    set(2, 0, 0, k1);
    set(3, k1, 0, 0);
    if (order == 2) return;
    set(4, k2a * y, k2a * x, 0);
    set(5, 0, k2a * z, k2a * y);
    set(6, 0, 0, k2b * 6.0 * z);
    set(7, k2a * z, 0, k2a * x);
    set(8, k2c * 2.0 * x, -k2c * 2.0 * y, 0);
    if (order == 3) return;
    set(9, k3a * 6.0 * x * y, k3a * (3.0 * x * x - 3.0 * y * y), 0);
    set(10, k3b * y * z, k3b * x * z, k3b * x * y);
    set(11, 0, k3c * (5.0 * z * z - 1.0), k3c * 10.0 * y * z);
    set(12, 0, 0, k3d * (15.0 * z * z - 3.0));
    set(13, k3c * (5.0 * z * z - 1.0), 0, k3c * 10.0 * x * z);
    set(14, k3e * 2.0 * x * z, -k3e * 2.0 * y * z, k3e * (x * x - y * y));
    set(15, k3a * 3.0 * (x * x - y * y), -k3a * 6.0 * x * y, 0);
}

void eval_probe_with_basis(const ProbeSH& probe, const double* basis, int order, double* f_a) {
    const int nc = order * order;
    const int n_a = probe.n_a;
    if (static_cast<int>(probe.coeffs.size()) < nc * n_a)
        throw std::invalid_argument("eval_probe: coefficient block smaller than l^2 * n_a");
    for (int k = 0; k < n_a; ++k) f_a[k] = 0.0;
    for (int j = 0; j < nc; ++j) {
        const double yj = basis[j];
        const double* row = probe.coeffs.data() + static_cast<size_t>(j) * n_a;
        for (int k = 0; k < n_a; ++k) f_a[k] += row[k] * yj;
    }
}

void eval_probe(const ProbeSH& probe, const Vec3& dir, int order, double* f_a) {
    double basis[kMaxShCoeffs];
    eval_sh_basis(dir, order, basis);
    eval_probe_with_basis(probe, basis, order, f_a);
}

void interp_probes(const ProbeCorners& corners, const Vec3& dir, int order, int n_a, double* f_a) {
    const int nc = order * order;
    double blended[kMaxShCoeffs * 64];
    if (nc * n_a > kMaxShCoeffs * 64)
        throw std::invalid_argument("interp_probes: n_a too large");
    std::memset(blended, 0, sizeof(double) * nc * n_a);
    for (int i = 0; i < 8; ++i) {
        const double w = corners.weights[i];
        if (w == 0.0) continue;
        const double* c = corners.probes[i]->coeffs.data();
        for (int t = 0; t < nc * n_a; ++t) blended[t] += w * c[t];
    }
    double basis[kMaxShCoeffs];
    eval_sh_basis(dir, order, basis);
    for (int k = 0; k < n_a; ++k) f_a[k] = 0.0;
    for (int j = 0; j < nc; ++j) {
        const double yj = basis[j];
        for (int k = 0; k < n_a; ++k) f_a[k] += blended[j * n_a + k] * yj;
    }
}

void interp_probes_per_corner(const ProbeCorners& corners, const Vec3& dir, int order, int n_a,
                              double* f_a) {
    double basis[kMaxShCoeffs];
    eval_sh_basis(dir, order, basis);
    std::vector<double> tmp(n_a);
    for (int k = 0; k < n_a; ++k) f_a[k] = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double w = corners.weights[i];
        eval_probe_with_basis(*corners.probes[i], basis, order, tmp.data());
        for (int k = 0; k < n_a; ++k) f_a[k] += w * tmp[k];
    }
}

void backprop_probe(std::span<const double> grad_fa, const ProbeCorners& corners, const Vec3& dir,
                    int order, int n_a, std::array<double*, 8> coeff_grads, Vec3* dir_grad) {
    const int nc = order * order;
    double basis[kMaxShCoeffs];
    eval_sh_basis(dir, order, basis);
    for (int i = 0; i < 8; ++i) {
        const double w = corners.weights[i];
        if (w == 0.0 || coeff_grads[i] == nullptr) continue;
        for (int j = 0; j < nc; ++j) {
            const double wy = w * basis[j];
            for (int k = 0; k < n_a; ++k) coeff_grads[i][j * n_a + k] += grad_fa[k] * wy;
        }
    }
    if (dir_grad) {
        double bgrad[kMaxShCoeffs][3];
        eval_sh_basis_grad(dir, order, bgrad);
        Vec3 g{0, 0, 0};
        for (int j = 0; j < nc; ++j) {
            // dF_a/dY_j dotted with upstream, times blended coefficient.
            double s = 0.0;
            for (int i = 0; i < 8; ++i) {
                const double w = corners.weights[i];
                if (w == 0.0) continue;
                const double* row = corners.probes[i]->coeffs.data() + static_cast<size_t>(j) * n_a;
                for (int k = 0; k < n_a; ++k) s += w * row[k] * grad_fa[k];
            }
            g.x += s * bgrad[j][0];
            g.y += s * bgrad[j][1];
            g.z += s * bgrad[j][2];
        }
        *dir_grad += g;
    }
}

std::array<double, 8> trilinear_weights(double fx, double fy, double fz) {
    std::array<double, 8> w;
    for (int i = 0; i < 8; ++i) {
        const double wx = (i & 1) ? fx : 1.0 - fx;
        const double wy = (i & 2) ? fy : 1.0 - fy;
        const double wz = (i & 4) ? fz : 1.0 - fz;
        w[i] = wx * wy * wz;
    }
    return w;
}

} // namespace sdfrecon
