#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdfrecon/dataset.hpp"
#include "sdfrecon/mesh.hpp"
#include "sdfrecon/vec.hpp"

namespace sdfrecon {

struct Material {
    Vec3 albedo{0.7, 0.7, 0.7};
    double r0 = 0.04;        // Schlick normal-incidence reflectance
    double spec_exp = 32.0;  // Phong exponent
};

struct Primitive {
    enum class Kind { Sphere, Box, Torus } kind = Kind::Sphere;
    Vec3 center{0, 0, 0};
    Vec3 extent{0.5, 0.5, 0.5}; // sphere: x = radius; torus: x = major, y = minor
    Material material;
};

struct Light {
    enum class Kind { Point, Directional } kind = Kind::Point;
    Vec3 pos_or_dir{0, 0, 1}; // point: position; directional: direction toward the light
    Vec3 intensity{1, 1, 1};  // point: radiant intensity (1/d^2 falloff); directional: irradiance
};

struct AnalyticScene {
    std::vector<Primitive> primitives;
    std::vector<Light> lights;
    Vec3 background{0, 0, 0};

    // Union-of-primitives SDF, exact per primitive.
    double sdf(const Vec3& p, int* which = nullptr) const;
    Vec3 normal(const Vec3& p) const; // analytic gradient of the closest primitive
    const Material& material_at(const Vec3& p) const;

    static AnalyticScene from_json_text(const std::string& text);
    static AnalyticScene load(const std::string& path);
};

// Schlick reflectance, Eq. 3 form.
double schlick(double cos_theta, double r0);

// Lambertian + normalized-Phong specular under discrete lights, clipped to
// [0,1]. `view` points from the surface toward the camera.
Vec3 shade(const AnalyticScene& scene, const Vec3& p, const Vec3& n, const Vec3& view);

struct RaytraceResult {
    ImageRGB image;
    ImageGray mask;
    ImageGray depth; // 0 where no hit
};

// Sphere tracing with surface threshold 1e-5.
RaytraceResult raytrace(const AnalyticScene& scene, const Camera& camera);

// Ring of cameras looking at the origin; ids 0..n-1; deterministic from seed.
std::vector<Camera> make_ring_cameras(int n_views, int resolution, double radius,
                                      double elevation, uint64_t seed);

Dataset make_dataset(const AnalyticScene& scene, int n_views, int resolution, double radius,
                     uint64_t seed);

// Reference surface: marching cubes of the analytic SDF on a dense grid over
// [-half_extent, half_extent]^3.
TriMesh analytic_mesh(const AnalyticScene& scene, int resolution, double half_extent);

} // namespace sdfrecon
