#include "c3dag/geometry.hpp"

#include "c3dag/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace c3dag {

bool intersect_box(const Ray& ray, const Aabb& box, RayInterval& out) {
    double enter = -std::numeric_limits<double>::infinity();
    double exit = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a];
        const double d = ray.direction[a];
        if (std::abs(d) < 1e-300) {
            if (o < box.lo[a] || o > box.hi[a]) return false;
            continue;
        }
        double k0 = (box.lo[a] - o) / d;
        double k1 = (box.hi[a] - o) / d;
        if (k0 > k1) std::swap(k0, k1);
        enter = std::max(enter, k0);
        exit = std::min(exit, k1);
    }
    if (exit < enter) return false;
    out = {enter, exit};
    return true;
}

Camera::Camera(const Vec3& position, const Vec3& look_at, const Vec3& up, double fov_y_deg,
               Resolution resolution, double near, double far)
    : position_(position),
      look_at_(look_at),
      up_(up),
      fov_y_(fov_y_deg),
      resolution_(resolution),
      near_(near),
      far_(far) {
    if ((position - look_at).norm() <= 0.0) throw ConfigError("camera position equals look_at");
    if (!(fov_y_deg > 0.0 && fov_y_deg < 180.0)) throw ConfigError("camera fov_y must lie in (0, 180)");
    if (!(near > 0.0 && near < far)) throw ConfigError("camera requires 0 < near < far");
    if (resolution.width <= 0 || resolution.height <= 0) throw ConfigError("camera resolution must be positive");
    if (up.norm() <= 0.0) throw ConfigError("camera up vector is zero");

    forward_ = (look_at - position).normalized();
    Vec3 r = forward_.cross(up);
    if (r.norm() < 1e-9 * up.norm()) {
        // Looking along the up vector: fall back to +y (or +x) as the up hint.
        Vec3 alt = std::abs(forward_.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX();
        r = forward_.cross(alt);
    }
    right_ = r.normalized();
    camera_up_ = right_.cross(forward_);
    focal_ = 0.5 * resolution.height / std::tan(deg_to_rad(fov_y_deg) * 0.5);
}

Camera Camera::with_resolution(Resolution r) const {
    return Camera(position_, look_at_, up_, fov_y_, r, near_, far_);
}

bool Camera::operator==(const Camera& o) const {
    return position_ == o.position_ && look_at_ == o.look_at_ && up_ == o.up_ && fov_y_ == o.fov_y_ &&
           resolution_ == o.resolution_ && near_ == o.near_ && far_ == o.far_;
}

void CameraSamplingConfig::validate() const {
    auto check = [](const Range& r, const char* name) {
        if (!(r.min <= r.max)) throw ConfigError(std::string("invalid ") + name + " range: min > max");
    };
    check(radius, "radius");
    check(azimuth, "azimuth");
    check(polar, "polar");
    if (radius.min <= 0.0) throw ConfigError("radius range must be positive");
    if (polar.min < 0.0 || polar.max > 180.0) throw ConfigError("polar range must lie in [0, 180]");
    if (!(fov_y > 0.0 && fov_y < 180.0)) throw ConfigError("fov_y must lie in (0, 180)");
    if (resolution.width <= 0 || resolution.height <= 0) throw ConfigError("resolution must be positive");
    if (!(near > 0.0 && near < far)) throw ConfigError("requires 0 < near < far");
}

Vec3 spherical_to_cartesian(const SphericalSample& s) {
    const double th = deg_to_rad(s.polar);
    const double ph = deg_to_rad(s.azimuth);
    return s.radius * Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
}

SphericalSample cartesian_to_spherical(const Vec3& p) {
    SphericalSample s;
    s.radius = p.norm();
    if (s.radius == 0.0) return {0.0, 0.0, 0.0};
    s.polar = rad_to_deg(std::acos(std::clamp(p.z() / s.radius, -1.0, 1.0)));
    double az = rad_to_deg(std::atan2(p.y(), p.x()));
    if (az < 0.0) az += 360.0;
    if (az >= 360.0) az -= 360.0;
    s.azimuth = az;
    return s;
}

Camera camera_from_spherical(const SphericalSample& s, double fov_y, Resolution resolution, double near,
                             double far) {
    return Camera(spherical_to_cartesian(s), Vec3::Zero(), Vec3::UnitZ(), fov_y, resolution, near, far);
}

namespace {

double uniform_in(Rng& rng, const Range& r) {
    if (r.min == r.max) return r.min;
    std::uniform_real_distribution<double> dist(r.min, r.max);
    return dist(rng);
}

}  // namespace

SphericalSample sample_spherical(Rng& rng, const CameraSamplingConfig& config) {
    config.validate();
    SphericalSample s;
    s.radius = uniform_in(rng, config.radius);
    s.azimuth = std::fmod(uniform_in(rng, config.azimuth), 360.0);
    if (s.azimuth < 0.0) s.azimuth += 360.0;
    s.polar = uniform_in(rng, config.polar);
    return s;
}

Camera sample_camera(Rng& rng, const CameraSamplingConfig& config) {
    const SphericalSample s = sample_spherical(rng, config);
    return camera_from_spherical(s, config.fov_y, config.resolution, config.near, config.far);
}

Projection project_point(const Camera& camera, const Vec3& p) {
    const Vec3 d = p - camera.position();
    Projection out;
    out.depth = d.dot(camera.forward());
    out.in_front = out.depth > camera.near();
    const double x = d.dot(camera.right());
    const double y = d.dot(camera.camera_up());
    const auto res = camera.resolution();
    // Behind-camera points still get a (mirrored) pixel; callers check in_front.
    const double inv = out.depth != 0.0 ? 1.0 / out.depth : 0.0;
    out.pixel = Vec2(0.5 * res.width + camera.focal() * x * inv, 0.5 * res.height - camera.focal() * y * inv);
    return out;
}

Ray primary_ray(const Camera& camera, const Vec2& pixel) {
    const auto res = camera.resolution();
    if (!(pixel.x() >= 0.0 && pixel.x() <= res.width && pixel.y() >= 0.0 && pixel.y() <= res.height)) {
        throw DomainError("pixel outside the image rectangle");
    }
    const double x = (pixel.x() - 0.5 * res.width) / camera.focal();
    const double y = (0.5 * res.height - pixel.y()) / camera.focal();
    Ray ray;
    ray.origin = camera.position();
    ray.direction = (camera.forward() + x * camera.right() + y * camera.camera_up()).normalized();
    return ray;
}

Ray pixel_ray(const Camera& camera, int i, int j) { return primary_ray(camera, Vec2(i + 0.5, j + 0.5)); }

}  // namespace c3dag
