#pragma once

#include <cstdint>
#include <vector>

#include "sdfrecon/image.hpp"
#include "sdfrecon/mesh.hpp"

namespace sdfrecon {

// Exact point-triangle distance.
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Median-split AABB tree over mesh triangles for nearest-distance queries.
class MeshDistance {
public:
    explicit MeshDistance(const TriMesh& mesh);
    double distance(const Vec3& p) const;

private:
    struct Node {
        Vec3 lo, hi;
        int left = -1, right = -1; // children, or
        int begin = 0, end = 0;    // leaf triangle range
    };
    const TriMesh& mesh_;
    std::vector<Node> nodes_;
    std::vector<int> tri_order_;

    int build(int begin, int end, std::vector<Vec3>& centroids);
    void query(int node, const Vec3& p, double& best) const;
    double tri_distance(int t, const Vec3& p) const;
};

// Area-weighted uniform surface samples, deterministic from seed.
std::vector<Vec3> sample_mesh_points(const TriMesh& mesh, int n, uint64_t seed);

struct ChamferResult {
    double accuracy = 0.0;     // mean pred->gt distance, scene units x1000
    double completeness = 0.0; // mean gt->pred distance, scene units x1000
    double mean = 0.0;         // (accuracy + completeness) / 2
};

// Two-way point-to-mesh chamfer, x1000. Points farther than max_dist from the
// other surface are excluded; max_dist <= 0 disables clipping.
ChamferResult chamfer(const std::vector<Vec3>& pred_points, const TriMesh& pred_mesh,
                      const std::vector<Vec3>& gt_points, const TriMesh& gt_mesh,
                      double max_dist);

// 10*log10(1/MSE) over in-mask pixels, capped at 99 dB.
double psnr_masked(const ImageRGB& img, const ImageRGB& gt, const ImageGray& mask);

} // namespace sdfrecon
