#include "c3dag/error.hpp"
#include "c3dag/geometry.hpp"

#include <doctest.h>

#include <array>
#include <cmath>

using namespace c3dag;

namespace {

Camera axis_camera(double fov = 45.0, Resolution res = {64, 64}) {
    return Camera(Vec3(0, 0, 2), Vec3::Zero(), Vec3::UnitZ(), fov, res);
}

}  // namespace

TEST_CASE("camera rejects invalid parameters") {
    CHECK_THROWS_AS(Camera(Vec3::Zero(), Vec3::Zero(), Vec3::UnitZ(), 45, {8, 8}), ConfigError);
    CHECK_THROWS_AS(Camera(Vec3::UnitX(), Vec3::Zero(), Vec3::UnitZ(), 180, {8, 8}), ConfigError);
    CHECK_THROWS_AS(Camera(Vec3::UnitX(), Vec3::Zero(), Vec3::UnitZ(), 45, {8, 8}, 1.0, 0.5), ConfigError);
}

TEST_CASE("sample_camera stays inside the configured shell") {
    CameraSamplingConfig cfg;  // radius [1,2], azimuth [0,360], polar [60,120]
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const SphericalSample s = sample_spherical(rng, cfg);
        CHECK(s.radius >= 1.0);
        CHECK(s.radius <= 2.0);
        CHECK(s.polar >= 60.0);
        CHECK(s.polar <= 120.0);
        CHECK(s.azimuth >= 0.0);
        CHECK(s.azimuth < 360.0);
    }
}

TEST_CASE("sample_camera degenerate ranges force the position") {
    CameraSamplingConfig cfg;
    cfg.radius = {1.5, 1.5};
    cfg.azimuth = {0, 0};
    cfg.polar = {90, 90};
    Rng rng(1);
    const Camera cam = sample_camera(rng, cfg);
    CHECK(cam.position().x() == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(std::abs(cam.position().y()) < 1e-12);
    CHECK(std::abs(cam.position().z()) < 1e-12);
    CHECK(cam.look_at() == Vec3::Zero());
}

TEST_CASE("sample_camera is deterministic and validates ranges") {
    CameraSamplingConfig cfg;
    Rng a(42), b(42);
    CHECK(sample_camera(a, cfg) == sample_camera(b, cfg));
    cfg.radius = {2.0, 1.0};
    CHECK_THROWS_AS(sample_camera(a, cfg), ConfigError);
}

TEST_CASE("azimuth histogram is uniform over 8 bins") {
    CameraSamplingConfig cfg;
    Rng rng(123);
    constexpr int n = 16000;
    std::array<int, 8> bins{};
    for (int i = 0; i < n; ++i) {
        const Vec3 p = sample_camera(rng, cfg).position();
        const double r = p.norm();
        REQUIRE(r >= 1.0 - 1e-12);
        REQUIRE(r <= 2.0 + 1e-12);
        const SphericalSample s = cartesian_to_spherical(p);
        bins[std::min(7, static_cast<int>(s.azimuth / 45.0))]++;
    }
    const double expect = n / 8.0;
    const double sigma = std::sqrt(n * (1.0 / 8) * (7.0 / 8));
    for (int c : bins) CHECK(std::abs(c - expect) < 3.0 * sigma);
}

TEST_CASE("project_point examples") {
    const Camera cam = axis_camera(90.0, {64, 64});
    const Projection c = project_point(cam, Vec3::Zero());
    CHECK(c.pixel.x() == doctest::Approx(32.0));
    CHECK(c.pixel.y() == doctest::Approx(32.0));
    CHECK(c.depth == doctest::Approx(2.0));
    CHECK(c.in_front);
    CHECK_FALSE(project_point(cam, Vec3(0, 0, 3)).in_front);
    // fov 90: tan(45) * 1 = 1 lands on the right edge.
    const Projection e = project_point(cam, Vec3(1, 0, 1));
    CHECK(e.pixel.x() == doctest::Approx(64.0));
    CHECK(e.pixel.y() == doctest::Approx(32.0));
}

TEST_CASE("projection is invariant to scaling the offset from the camera") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    const Camera cam = camera_from_spherical({1.7, 33.0, 70.0}, 45.0, {80, 60});
    for (int i = 0; i < 50; ++i) {
        const Vec3 p(u(rng), u(rng), u(rng));
        const Projection a = project_point(cam, p);
        const double s = 1.0 + 3.0 * (u(rng) + 0.5);
        const Projection b = project_point(cam, cam.position() + s * (p - cam.position()));
        CHECK((a.pixel - b.pixel).norm() < 1e-9);
        CHECK(b.depth == doctest::Approx(s * a.depth));
    }
}

TEST_CASE("primary_ray round-trips through project_point") {
    Rng rng(99);
    CameraSamplingConfig cfg;
    cfg.resolution = {96, 72};
    for (int c = 0; c < 10; ++c) {
        const Camera cam = sample_camera(rng, cfg);
        std::uniform_real_distribution<double> uu(0.0, 96.0), vv(0.0, 72.0), kk(0.1, 5.0);
        for (int i = 0; i < 100; ++i) {
            const Vec2 px(uu(rng), vv(rng));
            const Ray ray = primary_ray(cam, px);
            CHECK(ray.origin == cam.position());
            CHECK(std::abs(ray.direction.norm() - 1.0) < 1e-9);
            const Projection p = project_point(cam, ray.at(kk(rng)));
            REQUIRE(p.in_front);
            CHECK((p.pixel - px).norm() < 0.5);
            CHECK((p.pixel - px).norm() < 1e-9);
        }
    }
}

TEST_CASE("primary_ray principal and corner directions") {
    const Camera cam = axis_camera(90.0, {64, 64});
    const Ray center = primary_ray(cam, Vec2(32, 32));
    CHECK((center.direction - (cam.look_at() - cam.position()).normalized()).norm() < 1e-12);
    // Continuous corner (0, 0): vertical half-angle of a 90 degree frustum.
    const Ray corner = primary_ray(cam, Vec2(0, 0));
    const double vertical = std::atan2(corner.direction.dot(cam.camera_up()), corner.direction.dot(cam.forward()));
    CHECK(std::abs(rad_to_deg(vertical) - 45.0) < 1e-6);
    // Pixel-center convention: pixel (0, 0) samples (0.5, 0.5).
    const Ray p00 = pixel_ray(cam, 0, 0);
    const double v00 = std::atan2(p00.direction.dot(cam.camera_up()), p00.direction.dot(cam.forward()));
    CHECK(std::abs(v00 - std::atan(31.5 / 32.0)) < 1e-12);
    CHECK_THROWS_AS(primary_ray(cam, Vec2(-0.1, 3)), DomainError);
    CHECK_THROWS_AS(primary_ray(cam, Vec2(3, 64.5)), DomainError);
}

TEST_CASE("intersect_box handles inside and missing rays") {
    const Aabb box{Vec3(-1, -1, -1), Vec3(1, 1, 1)};
    RayInterval iv;
    REQUIRE(intersect_box({Vec3(0, 0, 3), Vec3(0, 0, -1)}, box, iv));
    CHECK(iv.enter == doctest::Approx(2.0));
    CHECK(iv.exit == doctest::Approx(4.0));
    REQUIRE(intersect_box({Vec3(0, 0, 0), Vec3(1, 0, 0)}, box, iv));
    CHECK(iv.enter == doctest::Approx(-1.0));
    CHECK_FALSE(intersect_box({Vec3(0, 3, 3), Vec3(0, 0, -1)}, box, iv));
}
