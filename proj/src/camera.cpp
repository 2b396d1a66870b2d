#include "sdfrecon/camera.hpp"

namespace sdfrecon {

Camera make_lookat_camera(int id, const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
                          double fy, int width, int height) {
    Camera c;
    c.id = id;
    c.fx = fx;
    c.fy = fy;
    c.cx = (width - 1) * 0.5;
    c.cy = (height - 1) * 0.5;
    c.width = width;
    c.height = height;
    c.pos = eye;
    Vec3 fwd = (target - eye).normalized();
    Vec3 right = fwd.cross(up).normalized();
    if (right.norm() < 1e-9) right = fwd.cross(Vec3(1, 0, 0)).normalized();
    Vec3 down = fwd.cross(right); // +y in image space
    // Columns of R are the camera axes expressed in world coordinates.
    c.rot = {right.x, down.x, fwd.x, right.y, down.y, fwd.y, right.z, down.z, fwd.z};
    return c;
}

} // namespace sdfrecon
