#include "sdfrecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace sdfrecon {

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Ericson, "Real-Time Collision Detection", closest point on triangle.
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return (p - (a + ab * v + ac * w)).norm();
}

MeshDistance::MeshDistance(const TriMesh& mesh) : mesh_(mesh) {
    if (mesh.triangles.empty()) throw std::invalid_argument("MeshDistance: empty mesh");
    const int n = static_cast<int>(mesh.triangles.size());
    tri_order_.resize(n);
    std::vector<Vec3> centroids(n);
    for (int i = 0; i < n; ++i) {
        tri_order_[i] = i;
        const auto& t = mesh.triangles[i];
        centroids[i] =
            (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) * (1.0 / 3.0);
    }
    nodes_.reserve(2 * n);
    build(0, n, centroids);
}

int MeshDistance::build(int begin, int end, std::vector<Vec3>& centroids) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi = -1.0 * lo;
    for (int i = begin; i < end; ++i) {
        const auto& t = mesh_.triangles[tri_order_[i]];
        for (int k = 0; k < 3; ++k) {
            const Vec3& v = mesh_.vertices[t[k]];
            lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
            hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
        }
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= 4) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    const Vec3 ext = hi - lo;
    const int axis = ext.x >= ext.y ? (ext.x >= ext.z ? 0 : 2) : (ext.y >= ext.z ? 1 : 2);
    const int mid = (begin + end) / 2;
    std::nth_element(tri_order_.begin() + begin, tri_order_.begin() + mid,
                     tri_order_.begin() + end,
                     [&](int a, int b) { return centroids[a][axis] < centroids[b][axis]; });
    const int left = build(begin, mid, centroids);
    const int right = build(mid, end, centroids);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

double MeshDistance::tri_distance(int t, const Vec3& p) const {
    const auto& tri = mesh_.triangles[t];
    return point_triangle_distance(p, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]],
                                   mesh_.vertices[tri[2]]);
}

namespace {
double box_distance(const Vec3& lo, const Vec3& hi, const Vec3& p) {
    const double dx = std::max({lo.x - p.x, 0.0, p.x - hi.x});
    const double dy = std::max({lo.y - p.y, 0.0, p.y - hi.y});
    const double dz = std::max({lo.z - p.z, 0.0, p.z - hi.z});
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}
} // namespace

void MeshDistance::query(int node, const Vec3& p, double& best) const {
    const Node& nd = nodes_[node];
    if (box_distance(nd.lo, nd.hi, p) >= best) return;
    if (nd.left < 0) {
        for (int i = nd.begin; i < nd.end; ++i)
            best = std::min(best, tri_distance(tri_order_[i], p));
        return;
    }
    const double dl = box_distance(nodes_[nd.left].lo, nodes_[nd.left].hi, p);
    const double dr = box_distance(nodes_[nd.right].lo, nodes_[nd.right].hi, p);
    if (dl <= dr) {
        query(nd.left, p, best);
        query(nd.right, p, best);
    } else {
        query(nd.right, p, best);
        query(nd.left, p, best);
    }
}

double MeshDistance::distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::max();
    query(0, p, best);
    return best;
}

std::vector<Vec3> sample_mesh_points(const TriMesh& mesh, int n, uint64_t seed) {
    if (mesh.triangles.empty()) throw std::invalid_argument("sample_mesh_points: empty mesh");
    std::vector<double> cum_area(mesh.triangles.size());
    double total = 0.0;
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        const Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
        const Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
        total += e1.cross(e2).norm() * 0.5;
        cum_area[i] = total;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Vec3> points(n);
    for (int i = 0; i < n; ++i) {
        const double r = uni(rng) * total;
        const size_t ti =
            std::lower_bound(cum_area.begin(), cum_area.end(), r) - cum_area.begin();
        const auto& t = mesh.triangles[std::min(ti, mesh.triangles.size() - 1)];
        double u = uni(rng), v = uni(rng);
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        points[i] = mesh.vertices[t[0]] + (mesh.vertices[t[1]] - mesh.vertices[t[0]]) * u +
                    (mesh.vertices[t[2]] - mesh.vertices[t[0]]) * v;
    }
    return points;
}

namespace {
double directional_mean(const std::vector<Vec3>& points, const MeshDistance& target,
                        double max_dist) {
    double sum = 0.0;
    long count = 0;
    for (const Vec3& p : points) {
        const double d = target.distance(p);
        if (max_dist > 0.0 && d > max_dist) continue;
        sum += d;
        ++count;
    }
    return count > 0 ? sum / count : 0.0;
}
} // namespace

ChamferResult chamfer(const std::vector<Vec3>& pred_points, const TriMesh& pred_mesh,
                      const std::vector<Vec3>& gt_points, const TriMesh& gt_mesh,
                      double max_dist) {
    if (pred_points.empty() || gt_points.empty() || pred_mesh.empty() || gt_mesh.empty())
        throw std::invalid_argument("chamfer: empty input");
    const MeshDistance to_gt(gt_mesh);
    const MeshDistance to_pred(pred_mesh);
    ChamferResult r;
    r.accuracy = 1000.0 * directional_mean(pred_points, to_gt, max_dist);
    r.completeness = 1000.0 * directional_mean(gt_points, to_pred, max_dist);
    r.mean = 0.5 * (r.accuracy + r.completeness);
    return r;
}

double psnr_masked(const ImageRGB& img, const ImageRGB& gt, const ImageGray& mask) {
    if (img.width != gt.width || img.height != gt.height)
        throw std::invalid_argument("psnr_masked: image shape mismatch");
    double sq = 0.0;
    long n = 0;
    for (int v = 0; v < img.height; ++v)
        for (int u = 0; u < img.width; ++u) {
            if (mask.at(u, v) <= 0.5) continue;
            sq += (img.pixel(u, v) - gt.pixel(u, v)).norm2();
            n += 3;
        }
    if (n == 0) return 99.0;
    const double mse = sq / n;
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

} // namespace sdfrecon
