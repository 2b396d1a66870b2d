#pragma once

#include <span>
#include <vector>

#include "sdfrecon/vec.hpp"

namespace sdfrecon {

// One-indexed spherical harmonic order: order l covers bands 0..l-1, l^2
// coefficients total. l = 4 is the supported maximum (16 coefficients).
inline constexpr int kMaxShOrder = 4;
inline constexpr int kMaxShCoeffs = kMaxShOrder * kMaxShOrder;

// Coefficient block of a single light-field probe. Layout is coefficient-major:
// coeffs[j * n_a + k] is channel k of the j-th basis coefficient, with basis
// functions ordered band-major, m ascending within each band.
struct ProbeSH {
    int n_a = 0;
    std::vector<double> coeffs; // l^2 * n_a

    int coeff_count() const { return n_a > 0 ? static_cast<int>(coeffs.size()) / n_a : 0; }
};

// Real orthonormalized SH basis (graphics convention, no Condon-Shortley
// phase), bands 0..l-1. `dir` must be unit length to 1e-6. Writes l^2 values.
void eval_sh_basis(const Vec3& dir, int order, double* out);

// Partial derivatives of the basis polynomials with respect to the direction
// components. grad[j][a] = dY_j/d(dir_a). Valid on the unit sphere.
void eval_sh_basis_grad(const Vec3& dir, int order, double grad[kMaxShCoeffs][3]);

// F_a[k] = sum_j coeffs[j][k] * Y_j(dir). `basis` holds precomputed Y values.
void eval_probe_with_basis(const ProbeSH& probe, const double* basis, int order, double* f_a);
void eval_probe(const ProbeSH& probe, const Vec3& dir, int order, double* f_a);

// Trilinear interpolation of 8 corner probes. The production path blends the
// coefficients first and evaluates the basis once.
struct ProbeCorners {
    std::array<const ProbeSH*, 8> probes{};
    std::array<double, 8> weights{};
};

void interp_probes(const ProbeCorners& corners, const Vec3& dir, int order, int n_a, double* f_a);

// Alternative evaluation order: evaluate each corner probe and blend the
// results. Kept alongside the coefficient-blend path as an algebraic
// cross-check.
void interp_probes_per_corner(const ProbeCorners& corners, const Vec3& dir, int order, int n_a,
                              double* f_a);

// Reverse mode for interp_probes. Scatters dL/db_ij[k] = grad_fa[k]*Y_j*w_i
// into the per-corner gradient buffers (same layout as ProbeSH::coeffs), and
// optionally returns dL/d(dir) through the basis polynomials.
void backprop_probe(std::span<const double> grad_fa, const ProbeCorners& corners, const Vec3& dir,
                    int order, int n_a, std::array<double*, 8> coeff_grads,
                    Vec3* dir_grad = nullptr);

// Trilinear corner weights for a fractional position in [0,1]^3. Corner i has
// bit 0 -> x, bit 1 -> y, bit 2 -> z.
std::array<double, 8> trilinear_weights(double fx, double fy, double fz);

} // namespace sdfrecon
