#pragma once

#include <array>
#include <vector>

#include "sdfrecon/vec.hpp"

namespace sdfrecon {

// Pinhole camera. Pose is world-from-camera: x_world = R * x_cam + t, with the
// camera looking along +z in its own frame.
struct Camera {
    int id = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    std::array<double, 9> rot{1, 0, 0, 0, 1, 0, 0, 0, 1}; // row-major
    Vec3 pos{0, 0, 0};

    Vec3 rotate(const Vec3& v) const {
        return {rot[0] * v.x + rot[1] * v.y + rot[2] * v.z,
                rot[3] * v.x + rot[4] * v.y + rot[5] * v.z,
                rot[6] * v.x + rot[7] * v.y + rot[8] * v.z};
    }
    Vec3 rotate_inv(const Vec3& v) const {
        return {rot[0] * v.x + rot[3] * v.y + rot[6] * v.z,
                rot[1] * v.x + rot[4] * v.y + rot[7] * v.z,
                rot[2] * v.x + rot[5] * v.y + rot[8] * v.z};
    }

    // Ray through pixel (u,v), measured at the pixel center when u,v are
    // integer coordinates plus 0.5.
    Vec3 pixel_dir(double u, double v) const {
        Vec3 d{(u - cx) / fx, (v - cy) / fy, 1.0};
        return rotate(d).normalized();
    }

    // Projects a world point; returns false when behind the camera.
    bool project(const Vec3& p, double& u, double& v) const {
        Vec3 c = rotate_inv(p - pos);
        if (c.z <= 1e-9) return false;
        u = fx * c.x / c.z + cx;
        v = fy * c.y / c.z + cy;
        return true;
    }

    // Max deviation of R^T R from identity.
    double orthonormality_error() const {
        double e = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0.0;
                for (int k = 0; k < 3; ++k) s += rot[3 * k + i] * rot[3 * k + j];
                e = std::max(e, std::abs(s - (i == j ? 1.0 : 0.0)));
            }
        return e;
    }

    // Camera scaled for a lower image resolution (integer divisor).
    Camera downscaled(int divisor) const {
        Camera c = *this;
        c.width = width / divisor;
        c.height = height / divisor;
        c.fx = fx / divisor;
        c.fy = fy / divisor;
        c.cx = (cx + 0.5) / divisor - 0.5;
        c.cy = (cy + 0.5) / divisor - 0.5;
        return c;
    }
};

// Look-at camera placed at `eye`, aiming at `target`, world up `up`.
Camera make_lookat_camera(int id, const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                          double fy, int width, int height);

} // namespace sdfrecon
