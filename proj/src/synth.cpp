#include "sdfrecon/synth.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sdfrecon {

namespace {

constexpr double kPi = 3.14159265358979323846;

double primitive_sdf(const Primitive& pr, const Vec3& p) {
    const Vec3 q = p - pr.center;
    switch (pr.kind) {
        case Primitive::Kind::Sphere:
            return q.norm() - pr.extent.x;
        case Primitive::Kind::Box: {
            const Vec3 d{std::abs(q.x) - pr.extent.x, std::abs(q.y) - pr.extent.y,
                         std::abs(q.z) - pr.extent.z};
            const Vec3 outside{std::max(d.x, 0.0), std::max(d.y, 0.0), std::max(d.z, 0.0)};
            return outside.norm() + std::min(std::max(d.x, std::max(d.y, d.z)), 0.0);
        }
        case Primitive::Kind::Torus: {
            const double qx = std::sqrt(q.x * q.x + q.z * q.z) - pr.extent.x;
            return std::sqrt(qx * qx + q.y * q.y) - pr.extent.y;
        }
    }
    return 0.0;
}

Vec3 primitive_grad(const Primitive& pr, const Vec3& p) {
    const Vec3 q = p - pr.center;
    switch (pr.kind) {
        case Primitive::Kind::Sphere:
            return q.normalized();
        case Primitive::Kind::Box: {
            const Vec3 d{std::abs(q.x) - pr.extent.x, std::abs(q.y) - pr.extent.y,
                         std::abs(q.z) - pr.extent.z};
            const Vec3 outside{std::max(d.x, 0.0), std::max(d.y, 0.0), std::max(d.z, 0.0)};
            Vec3 g;
            if (outside.norm2() > 0.0) {
                g = outside.normalized();
            } else {
                // Inside: gradient points along the axis of least penetration.
                if (d.x >= d.y && d.x >= d.z) g = {1, 0, 0};
                else if (d.y >= d.z) g = {0, 1, 0};
                else g = {0, 0, 1};
            }
            return {q.x < 0 ? -g.x : g.x, q.y < 0 ? -g.y : g.y, q.z < 0 ? -g.z : g.z};
        }
        case Primitive::Kind::Torus: {
            const double len = std::sqrt(q.x * q.x + q.z * q.z);
            if (len < 1e-12) return {0, q.y >= 0 ? 1.0 : -1.0, 0};
            const double qx = len - pr.extent.x;
            const Vec3 ring{q.x / len * qx, q.y, q.z / len * qx};
            return ring.normalized();
        }
    }
    return {0, 0, 1};
}

} // namespace

double AnalyticScene::sdf(const Vec3& p, int* which) const {
    double best = std::numeric_limits<double>::max();
    int idx = -1;
    for (size_t i = 0; i < primitives.size(); ++i) {
        const double d = primitive_sdf(primitives[i], p);
        if (d < best) {
            best = d;
            idx = static_cast<int>(i);
        }
    }
    if (which) *which = idx;
    return best;
}

Vec3 AnalyticScene::normal(const Vec3& p) const {
    int which = -1;
    sdf(p, &which);
    if (which < 0) return {0, 0, 1};
    return primitive_grad(primitives[which], p);
}

const Material& AnalyticScene::material_at(const Vec3& p) const {
    int which = -1;
    sdf(p, &which);
    static const Material fallback;
    return which >= 0 ? primitives[which].material : fallback;
}

double schlick(double cos_theta, double r0) {
    const double m = 1.0 - clampd(cos_theta, 0.0, 1.0);
    const double m2 = m * m;
    return r0 + (1.0 - r0) * m2 * m2 * m;
}

Vec3 shade(const AnalyticScene& scene, const Vec3& p, const Vec3& n, const Vec3& view) {
    const Material& mat = scene.material_at(p);
    const Vec3 refl = reflect_about(n, view);
    Vec3 out{0, 0, 0};
    for (const Light& light : scene.lights) {
        Vec3 omega;     // direction toward the light
        Vec3 radiance;  // incident L
        if (light.kind == Light::Kind::Point) {
            const Vec3 to_light = light.pos_or_dir - p;
            const double d2 = std::max(to_light.norm2(), 1e-12);
            omega = to_light / std::sqrt(d2);
            radiance = light.intensity / d2;
        } else {
            omega = light.pos_or_dir.normalized();
            radiance = light.intensity;
        }
        const double cos_in = omega.dot(n);
        if (cos_in <= 0.0) continue;
        const Vec3 half = (omega + view).normalized();
        const double fresnel = schlick(half.dot(view), mat.r0);
        const double lobe = std::pow(std::max(0.0, refl.dot(omega)), mat.spec_exp);
        const double spec = fresnel * (mat.spec_exp + 2.0) / (2.0 * kPi) * lobe;
        const Vec3 fr = mat.albedo * (1.0 / kPi) + Vec3{spec, spec, spec};
        out += fr.cwiseMul(radiance) * cos_in;
    }
    return {clampd(out.x, 0.0, 1.0), clampd(out.y, 0.0, 1.0), clampd(out.z, 0.0, 1.0)};
}

RaytraceResult raytrace(const AnalyticScene& scene, const Camera& camera) {
    RaytraceResult out;
    out.image = ImageRGB(camera.width, camera.height);
    out.mask = ImageGray(camera.width, camera.height);
    out.depth = ImageGray(camera.width, camera.height);
    constexpr double kEps = 1e-5;
    constexpr double kMaxDist = 100.0;
    constexpr int kMaxSteps = 512;
    for (int v = 0; v < camera.height; ++v)
        for (int u = 0; u < camera.width; ++u) {
            const Vec3 dir = camera.pixel_dir(u + 0.5, v + 0.5);
            double t = 0.0;
            bool hit = false;
            for (int s = 0; s < kMaxSteps && t < kMaxDist; ++s) {
                const double d = scene.sdf(camera.pos + dir * t);
                if (d < kEps) {
                    hit = true;
                    break;
                }
                t += d;
            }
            if (hit) {
                const Vec3 p = camera.pos + dir * t;
                const Vec3 n = scene.normal(p);
                out.image.set_pixel(u, v, shade(scene, p, n, -dir));
                out.mask.at(u, v) = 1.0;
                out.depth.at(u, v) = t;
            } else {
                out.image.set_pixel(u, v, scene.background);
            }
        }
    return out;
}

std::vector<Camera> make_ring_cameras(int n_views, int resolution, double radius,
                                      double elevation, uint64_t seed) {
    // The seed only offsets the starting azimuth so the placement stays
    // deterministic and uniformly spread.
    const double phase = (seed % 360) * kPi / 180.0;
    std::vector<Camera> cams;
    const double f = resolution * 1.2; // ~45 degree vertical FOV
    for (int i = 0; i < n_views; ++i) {
        const double az = phase + 2.0 * kPi * i / n_views;
        // Alternate above/below the equator so the poles are constrained too.
        const double el = elevation * (i % 2 == 0 ? 1.0 : -1.0);
        const Vec3 eye{radius * std::cos(el) * std::cos(az), radius * std::sin(el),
                       radius * std::cos(el) * std::sin(az)};
        cams.push_back(make_lookat_camera(i, eye, {0, 0, 0}, {0, 1, 0}, f, f, resolution,
                                          resolution));
    }
    return cams;
}

Dataset make_dataset(const AnalyticScene& scene, int n_views, int resolution, double radius,
                     uint64_t seed) {
    Dataset ds;
    for (const Camera& cam : make_ring_cameras(n_views, resolution, radius, 0.35, seed)) {
        RaytraceResult rt = raytrace(scene, cam);
        DatasetView view;
        view.camera = cam;
        view.image = std::move(rt.image);
        view.mask = std::move(rt.mask);
        ds.views.push_back(std::move(view));
    }
    return ds;
}

TriMesh analytic_mesh(const AnalyticScene& scene, int resolution, double half_extent) {
    const int n = resolution + 1;
    std::vector<double> values(static_cast<size_t>(n) * n * n);
    const double spacing = 2.0 * half_extent / resolution;
    const Vec3 origin{-half_extent, -half_extent, -half_extent};
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z)
                values[(static_cast<size_t>(x) * n + y) * n + z] =
                    scene.sdf(origin + Vec3(x, y, z) * spacing);
    return marching_cubes_field(values, n, n, n, origin, spacing);
}

AnalyticScene AnalyticScene::from_json_text(const std::string& text) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("scene: invalid JSON: ") + e.what());
    }
    auto vec3 = [](const json& a) -> Vec3 {
        if (!a.is_array() || a.size() != 3)
            throw std::runtime_error("scene: expected a 3-element array");
        return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
    };
    AnalyticScene s;
    if (j.contains("background")) s.background = vec3(j["background"]);
    for (const json& jp : j.value("primitives", json::array())) {
        Primitive p;
        const std::string kind = jp.value("kind", "sphere");
        if (kind == "sphere") p.kind = Primitive::Kind::Sphere;
        else if (kind == "box") p.kind = Primitive::Kind::Box;
        else if (kind == "torus") p.kind = Primitive::Kind::Torus;
        else throw std::runtime_error("scene: unknown primitive kind: " + kind);
        if (jp.contains("center")) p.center = vec3(jp["center"]);
        if (jp.contains("radius")) p.extent.x = jp["radius"].get<double>();
        if (jp.contains("extent")) p.extent = vec3(jp["extent"]);
        if (jp.contains("albedo")) p.material.albedo = vec3(jp["albedo"]);
        p.material.r0 = jp.value("r0", 0.04);
        p.material.spec_exp = jp.value("spec_exp", 32.0);
        s.primitives.push_back(p);
    }
    for (const json& jl : j.value("lights", json::array())) {
        Light l;
        const std::string kind = jl.value("kind", "point");
        if (kind == "point") l.kind = Light::Kind::Point;
        else if (kind == "directional") l.kind = Light::Kind::Directional;
        else throw std::runtime_error("scene: unknown light kind: " + kind);
        if (jl.contains("position")) l.pos_or_dir = vec3(jl["position"]);
        if (jl.contains("direction")) l.pos_or_dir = vec3(jl["direction"]);
        if (jl.contains("intensity")) l.intensity = vec3(jl["intensity"]);
        s.lights.push_back(l);
    }
    if (s.primitives.empty()) throw std::runtime_error("scene: no primitives");
    return s;
}

AnalyticScene AnalyticScene::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("scene: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

} // namespace sdfrecon
