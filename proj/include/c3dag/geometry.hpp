#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <limits>
#include <random>

namespace c3dag {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rng = std::mt19937_64;

// World frame: right-handed, +z up. Azimuth is measured in the xy-plane from
// +x towards +y, polar from +z. Pixel (i, j) samples the continuous image
// coordinate (i + 0.5, j + 0.5); u grows to the right and v grows downwards.

/// Rigid transform: world = rotation * local + translation.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Vec3 apply_inverse(const Vec3& p) const { return rotation.transpose() * (p - translation); }
    RigidTransform compose(const RigidTransform& inner) const {
        return {rotation * inner.rotation, rotation * inner.translation + translation};
    }
};

struct Aabb {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();

    bool contains(const Vec3& p) const {
        return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
    }
    /// True when `inner` lies in the open interior of this box.
    bool strictly_contains(const Aabb& inner) const {
        return (inner.lo.array() > lo.array()).all() && (inner.hi.array() < hi.array()).all();
    }
    Vec3 extent() const { return hi - lo; }
    Aabb padded(double pad) const { return {lo.array() - pad, hi.array() + pad}; }
    void expand(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    static Aabb empty() {
        const double inf = std::numeric_limits<double>::infinity();
        return {Vec3::Constant(inf), Vec3::Constant(-inf)};
    }
};

struct Ray {
    Vec3 origin = Vec3::Zero();
    Vec3 direction = Vec3::UnitX();  // unit length

    Vec3 at(double k) const { return origin + k * direction; }
};

/// Parametric interval [k_enter, k_exit] of a ray inside a box, if any.
struct RayInterval {
    double enter = 0.0;
    double exit = 0.0;
};
bool intersect_box(const Ray& ray, const Aabb& box, RayInterval& out);

struct Resolution {
    int width = 64;
    int height = 64;

    int pixel_count() const { return width * height; }
    bool operator==(const Resolution&) const = default;
};

class Camera {
public:
    /// Throws ConfigError when the invariants do not hold.
    Camera(const Vec3& position, const Vec3& look_at, const Vec3& up, double fov_y_deg,
           Resolution resolution, double near = 0.01, double far = 100.0);

    const Vec3& position() const { return position_; }
    const Vec3& look_at() const { return look_at_; }
    const Vec3& up() const { return up_; }
    double fov_y() const { return fov_y_; }
    Resolution resolution() const { return resolution_; }
    double near() const { return near_; }
    double far() const { return far_; }

    /// Orthonormal camera basis. `forward` points at look_at, `right` maps to +u,
    /// `camera_up` maps to -v.
    const Vec3& forward() const { return forward_; }
    const Vec3& right() const { return right_; }
    const Vec3& camera_up() const { return camera_up_; }
    /// Focal length in pixels.
    double focal() const { return focal_; }

    Camera with_resolution(Resolution r) const;

    bool operator==(const Camera& o) const;

private:
    Vec3 position_;
    Vec3 look_at_;
    Vec3 up_;
    double fov_y_;
    Resolution resolution_;
    double near_;
    double far_;
    Vec3 forward_;
    Vec3 right_;
    Vec3 camera_up_;
    double focal_;
};

struct Range {
    double min = 0.0;
    double max = 0.0;
};

struct SphericalSample {
    double radius = 1.0;
    double azimuth = 0.0;  // degrees
    double polar = 90.0;   // degrees from +z
};

struct CameraSamplingConfig {
    Range radius{1.0, 2.0};
    Range azimuth{0.0, 360.0};
    Range polar{60.0, 120.0};
    double fov_y = 45.0;
    Resolution resolution{64, 64};
    double near = 0.01;
    double far = 100.0;

    void validate() const;
};

Vec3 spherical_to_cartesian(const SphericalSample& s);
SphericalSample cartesian_to_spherical(const Vec3& p);

/// Camera at a spherical position looking at the origin with +z up.
Camera camera_from_spherical(const SphericalSample& s, double fov_y, Resolution resolution,
                             double near = 0.01, double far = 100.0);

SphericalSample sample_spherical(Rng& rng, const CameraSamplingConfig& config);
Camera sample_camera(Rng& rng, const CameraSamplingConfig& config);

struct Projection {
    Vec2 pixel = Vec2::Zero();
    double depth = 0.0;
    bool in_front = false;
};

Projection project_point(const Camera& camera, const Vec3& p);

/// Ray through a continuous image coordinate. Throws DomainError outside
/// [0, width] x [0, height].
Ray primary_ray(const Camera& camera, const Vec2& pixel);

/// Ray through the center of pixel (i, j).
Ray pixel_ray(const Camera& camera, int i, int j);

inline double deg_to_rad(double d) { return d * (3.14159265358979323846 / 180.0); }
inline double rad_to_deg(double r) { return r * (180.0 / 3.14159265358979323846); }

}  // namespace c3dag
