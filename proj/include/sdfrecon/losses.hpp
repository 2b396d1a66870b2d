#pragma once

#include <span>

#include "sdfrecon/grads.hpp"
#include "sdfrecon/grid.hpp"
#include "sdfrecon/image.hpp"

namespace sdfrecon {

inline constexpr double kPhotoEps = 1e-3; // relative-weighting epsilon

// 1/(max(a,b)+eps): penalizes relative rather than absolute differences.
inline double relative_weight(double a, double b, double eps) {
    return 1.0 / (std::max(a, b) + eps);
}

// Empirical factor lowering per-voxel regularization gradients away from the
// zero crossing; halves at |s| = 0.2 scene units.
inline double proximity_weight(double s) { return 1.0 / (1.0 + std::abs(s) * 5.0); }

// Each loss reports the plain (unweighted) value and the reweighted value.
// Gradients always carry the reweighting; the reweighted value is the scalar
// whose exact gradient they are (with the weights held fixed), which is what
// finite-difference audits check against.
struct LossResult {
    double plain = 0.0;
    double weighted = 0.0;
};

// Photometric term for one pixel. In-mask pixels penalize the color
// difference; out-of-mask pixels drive the accumulated opacity to zero.
// `scale` folds in lambda_photo and the batch normalization. Frozen weights
// (for finite-difference audits) override the live ones when given.
struct PhotoPixel {
    double plain = 0.0;
    double weighted = 0.0;
    Vec3 d_color{0, 0, 0};
    double d_alpha = 0.0;
};

PhotoPixel photo_pixel(const Vec3& c, const Vec3& c_gt, bool in_mask, double acc_alpha,
                       double scale, const Vec3* frozen_w = nullptr,
                       const double* frozen_wa = nullptr);

// Image-level wrapper; writes per-pixel gradients when images are given.
LossResult loss_photo(const ImageRGB& rendered, const ImageGray& acc_alpha, const ImageRGB& gt,
                      const ImageGray& mask, double scale, ImageRGB* d_color = nullptr,
                      ImageGray* d_alpha = nullptr);

// Per-voxel regularizers. `wsrc` is the grid the reweighting factors are read
// from; pass the same grid for training, or the unperturbed base grid when
// running finite-difference audits. Gradients accumulate into gb (smooth_sdf
// staging plus direct raw terms) scaled by lambda.
LossResult loss_sdf(const SparseGrid& grid, const SparseGrid& wsrc, double lambda,
                    GradBuffers* gb);
LossResult loss_eikonal(const SparseGrid& grid, const SparseGrid& wsrc, double lambda,
                        GradBuffers* gb);
LossResult loss_normal(const SparseGrid& grid, const SparseGrid& wsrc, double lambda,
                       GradBuffers* gb);
LossResult loss_features(const SparseGrid& grid, const SparseGrid& wsrc, double lambda,
                         GradBuffers* gb);
// Probe smoothness over the 6-neighborhood lattice; each unordered pair once.
LossResult loss_probes(const SparseGrid& grid, double lambda, GradBuffers* gb);

} // namespace sdfrecon
