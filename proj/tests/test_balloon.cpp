#include "c3dag/balloon.hpp"
#include "c3dag/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace c3dag;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Distance from a 2D point to a segment.
double seg_dist(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

// Signed distance of a solid of revolution from its closed (rho, z) profile
// polygon, which must include the axis segment. Independent of the primitive
// formulas under test.
double profile_sdf(const std::vector<Vec2>& poly, const Vec3& p) {
    const Vec2 q(std::hypot(p.x(), p.y()), p.z());
    double d = std::numeric_limits<double>::infinity();
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        // Segments on the axis (rho == 0) are not part of the surface.
        if (!(a.x() == 0.0 && b.x() == 0.0)) d = std::min(d, seg_dist(q, a, b));
        if ((a.y() > q.y()) != (b.y() > q.y()) && q.x() < (b.x() - a.x()) * (q.y() - a.y()) / (b.y() - a.y()) + a.x())
            inside = !inside;
    }
    return inside ? -d : d;
}

BalloonShape sphere_shape(double r, const Vec3& c = Vec3::Zero()) {
    BalloonShape s;
    s.primitives.push_back(make_sphere(c, r));
    return s;
}

}  // namespace

TEST_CASE("primitive SDF examples") {
    const BalloonShape s = sphere_shape(1.0);
    CHECK(sdf_eval(s, Vec3::Zero()) == doctest::Approx(-1.0));
    CHECK(sdf_eval(s, Vec3(0, 3, 0)) == doctest::Approx(2.0));
    BalloonShape two = s;
    two.primitives.push_back(make_sphere(Vec3(5, 0, 0), 1.0));
    CHECK(sdf_eval(two, Vec3::Zero()) == doctest::Approx(-1.0));
    CHECK(sdf_eval(BalloonShape{}, Vec3::Zero()) == std::numeric_limits<double>::infinity());
}

TEST_CASE("cylinder and cone SDFs match a profile-distance oracle") {
    Rng rng(17);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    SdfPrimitive cyl;
    cyl.kind = PrimitiveKind::capped_cylinder;
    cyl.params = Vec3(0.2, 0.3, 0);
    const std::vector<Vec2> cyl_profile = {{0, -0.3}, {0.2, -0.3}, {0.2, 0.3}, {0, 0.3}};
    SdfPrimitive cone;
    cone.kind = PrimitiveKind::cone;
    cone.params = Vec3(0.25, 0.5, 0);
    const std::vector<Vec2> cone_profile = {{0, 0}, {0.25, 0}, {0, 0.5}};
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p(u(rng), u(rng), u(rng));
        CHECK(cyl.eval(p) == doctest::Approx(profile_sdf(cyl_profile, p)).epsilon(1e-9));
        CHECK(cone.eval(p) == doctest::Approx(profile_sdf(cone_profile, p)).epsilon(1e-9));
    }
}

TEST_CASE("ellipsoid SDF: exact zero set, exact on the shortest axis, conservative elsewhere") {
    SdfPrimitive e;
    e.kind = PrimitiveKind::ellipsoid;
    e.params = Vec3(0.3, 0.2, 0.1);
    CHECK(e.eval(Vec3(0, 0, 0.25)) == doctest::Approx(0.15));
    CHECK(e.eval(Vec3(0, 0, 0.05)) == doctest::Approx(-0.05));
    Rng rng(2);
    std::uniform_real_distribution<double> ang(0, 2 * kPi), cz(-1, 1), u(-0.6, 0.6);
    for (int i = 0; i < 200; ++i) {
        const double phi = ang(rng), z = cz(rng), s = std::sqrt(1 - z * z);
        const Vec3 surf(0.3 * s * std::cos(phi), 0.2 * s * std::sin(phi), 0.1 * z);
        CHECK(std::abs(e.eval(surf)) < 1e-12);
    }
    // Brute-force distance to a dense surface sampling bounds the estimate from above.
    std::vector<Vec3> samples;
    for (int a = 0; a < 200; ++a)
        for (int b = 0; b <= 100; ++b) {
            const double th = kPi * b / 100.0, ph = 2 * kPi * a / 200.0;
            samples.emplace_back(0.3 * std::sin(th) * std::cos(ph), 0.2 * std::sin(th) * std::sin(ph),
                                 0.1 * std::cos(th));
        }
    for (int i = 0; i < 100; ++i) {
        const Vec3 p(u(rng), u(rng), u(rng));
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : samples) best = std::min(best, (p - q).norm());
        CHECK(std::abs(e.eval(p)) <= best + 1e-9);
    }
}

TEST_CASE("build_shape on the default skeleton") {
    const Skeleton sk = default_skeleton();
    const BalloonShape shape = build_shape(sk, default_body_config(sk));
    REQUIRE(shape.primitives.size() == 12);
    int heads = 0, torsos = 0, limbs = 0, tails = 0, snouts = 0;
    for (const auto& p : shape.primitives) {
        CHECK((p.params.head(2).array() > 0).all());
        switch (p.part) {
            case BodyPart::head: ++heads; break;
            case BodyPart::torso: ++torsos; break;
            case BodyPart::limb: {
                ++limbs;
                REQUIRE(p.bone.has_value());
                const Vec3 bone = sk[p.bone->second] - sk[p.bone->first];
                const Vec3 axis = p.frame.rotation.col(2);
                CHECK(axis.cross(bone.normalized()).norm() < 1e-9);
                CHECK(std::abs(p.params[1] - 0.5 * bone.norm()) < 1e-12);
                CHECK(p.kind == PrimitiveKind::capped_cylinder);
                break;
            }
            case BodyPart::tail: ++tails; CHECK(p.kind == PrimitiveKind::cone); break;
            case BodyPart::snout: ++snouts; CHECK(p.kind == PrimitiveKind::cone); break;
            default: break;
        }
        const Mat3 r = p.frame.rotation;
        CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
        CHECK(r.determinant() == doctest::Approx(1.0));
    }
    CHECK(heads == 1);
    CHECK(torsos == 1);
    CHECK(limbs == 8);
    CHECK(tails == 1);
    CHECK(snouts == 1);
    // every limb bone covered by exactly one cylinder
    for (const auto& b : canonical_bones()) {
        const bool is_limb = keypoint_name(b.first).find("thigh") != std::string_view::npos ||
                             keypoint_name(b.first).find("knee") != std::string_view::npos;
        if (!is_limb) continue;
        int covering = 0;
        for (const auto& p : shape.primitives)
            if (p.kind == PrimitiveKind::capped_cylinder && p.bone == b) ++covering;
        CHECK(covering == 1);
    }
}

TEST_CASE("build_shape rejects degenerate bones") {
    Skeleton sk = default_skeleton();
    sk = sk.with_keypoint(Keypoint::tail_end, sk[Keypoint::back_end]);
    CHECK_THROWS_WITH_AS(build_shape(sk, default_body_config(default_skeleton())),
                         "degenerate bone back_end–tail_end", DegenerateBoneError);
    BodyPartConfig bad;
    bad.limb_radius = 0.0;
    CHECK_THROWS_AS(build_shape(default_skeleton(), bad), ConfigError);
}

TEST_CASE("build_shape is rigidly equivariant") {
    const Skeleton sk = default_skeleton();
    const BodyPartConfig cfg = default_body_config(sk);
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(0.7, Vec3(0.3, -0.5, 0.8).normalized()).toRotationMatrix();
    t.translation = Vec3(0.4, -1.2, 0.3);
    const BalloonShape a = build_shape(sk, cfg);
    const BalloonShape b = build_shape(sk.transformed(t), cfg);
    REQUIRE(a.primitives.size() == b.primitives.size());
    for (std::size_t i = 0; i < a.primitives.size(); ++i) {
        const RigidTransform expect = t.compose(a.primitives[i].frame);
        CHECK((expect.rotation - b.primitives[i].frame.rotation).norm() < 1e-9);
        CHECK((expect.translation - b.primitives[i].frame.translation).norm() < 1e-9);
    }
    Rng rng(4);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    for (int i = 0; i < 200; ++i) {
        const Vec3 p(u(rng), u(rng), u(rng));
        CHECK(sdf_eval(b, t.apply(p)) == doctest::Approx(sdf_eval(a, p)).epsilon(1e-9));
    }
}

TEST_CASE("union monotonicity") {
    const Skeleton sk = default_skeleton();
    const BalloonShape full = build_shape(sk, default_body_config(sk));
    Rng rng(8);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    BalloonShape partial;
    for (const auto& prim : full.primitives) {
        BalloonShape next = partial;
        next.primitives.push_back(prim);
        for (int i = 0; i < 50; ++i) {
            const Vec3 p(u(rng), u(rng), u(rng));
            CHECK(sdf_eval(next, p) <= sdf_eval(partial, p));
        }
        partial = next;
    }
}

TEST_CASE("marching cubes sphere: genus 0, area within 3%, level-set containment") {
    const BalloonShape s = sphere_shape(0.5);
    const int res = 64;
    const TriMesh mesh = extract_mesh(s, res);
    const MeshStats st = mesh_stats(mesh);
    CHECK(st.watertight());
    CHECK(st.misoriented_edges == 0);
    CHECK(st.euler_characteristic() == 2);
    CHECK(st.components == 1);
    CHECK(st.signed_volume > 0.0);  // outward orientation
    CHECK(st.min_triangle_area > 1e-12);
    const double analytic = 4.0 * kPi * 0.25;  // = pi
    CHECK(std::abs(st.area - analytic) / analytic < 0.03);
    const double cell_diag = std::sqrt(3.0) * (1.0 / (res - 4));
    for (const auto& v : mesh.vertices) {
        CHECK(std::abs(v.norm() - 0.5) < cell_diag);
        CHECK(std::abs(sdf_eval(s, v)) < cell_diag);
    }
}

TEST_CASE("marching cubes is watertight and orientable across resolutions") {
    const Skeleton sk = default_skeleton();
    const BalloonShape animal = build_shape(sk, default_body_config(sk));
    for (int res : {16, 32, 64}) {
        for (const BalloonShape* shape : {&animal}) {
            const MeshStats st = mesh_stats(extract_mesh(*shape, res));
            CAPTURE(res);
            CHECK(st.watertight());
            CHECK(st.misoriented_edges == 0);
            CHECK(st.signed_volume > 0.0);
            CHECK(st.min_triangle_area > 1e-12);
        }
        const MeshStats sphere = mesh_stats(extract_mesh(sphere_shape(0.5), res));
        CHECK(sphere.watertight());
        CHECK(sphere.euler_characteristic() == 2);
    }
}

TEST_CASE("union topology") {
    BalloonShape overlap = sphere_shape(0.5);
    overlap.primitives.push_back(make_sphere(Vec3(0.6, 0, 0), 0.5));
    CHECK(mesh_stats(extract_mesh(overlap, 48)).components == 1);
    BalloonShape apart = sphere_shape(0.5);
    apart.primitives.push_back(make_sphere(Vec3(2.0, 0, 0), 0.5));
    const MeshStats st = mesh_stats(extract_mesh(apart, 48));
    CHECK(st.components == 2);
    CHECK(st.euler_characteristic() == 4);
    CHECK_THROWS_AS(extract_mesh(BalloonShape{}, 32), DomainError);
    CHECK_THROWS_AS(extract_mesh(apart, 8), DomainError);
}

TEST_CASE("sphere meshes converge between resolutions") {
    const BalloonShape s = sphere_shape(0.5);
    const TriMesh a = extract_mesh(s, 32);
    const TriMesh b = extract_mesh(s, 64);
    const double cell64 = 1.0 / 60.0;
    // Sampled one-sided distances in both directions (vertex to nearest vertex).
    auto directed = [](const TriMesh& from, const TriMesh& to) {
        double worst = 0.0;
        for (std::size_t i = 0; i < from.vertices.size(); i += 7) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to.vertices) best = std::min(best, (from.vertices[i] - q).squaredNorm());
            worst = std::max(worst, std::sqrt(best));
        }
        return worst;
    };
    CHECK(std::max(directed(a, b), directed(b, a)) < 2.0 * cell64);
}

TEST_CASE("OBJ export") {
    TriMesh tri;
    tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    tri.triangles = {{0, 1, 2}};
    const std::string obj = export_obj(tri);
    int v = 0, f = 0;
    for (std::size_t pos = 0; pos < obj.size();) {
        const auto end = obj.find('\n', pos);
        const std::string line = obj.substr(pos, end - pos);
        if (line.rfind("v ", 0) == 0) ++v;
        if (line.rfind("f ", 0) == 0) ++f;
        pos = end + 1;
    }
    CHECK(v == 3);
    CHECK(f == 1);
    CHECK(obj.find("f 1 2 3") != std::string::npos);

    const TriMesh sphere = extract_mesh(sphere_shape(0.37, Vec3(0.1234567891, -2.5, 3.3)), 24);
    const TriMesh back = parse_obj(export_obj(sphere));
    REQUIRE(back.vertices.size() == sphere.vertices.size());
    CHECK(back.triangles == sphere.triangles);
    for (std::size_t i = 0; i < back.vertices.size(); ++i) CHECK((back.vertices[i] - sphere.vertices[i]).norm() < 1e-7);
}

TEST_CASE("shape document round trip") {
    const Skeleton sk = default_skeleton();
    const BalloonShape a = build_shape(sk, default_body_config(sk));
    const BalloonShape b = load_shape(save_shape(a));
    REQUIRE(b.primitives.size() == a.primitives.size());
    Rng rng(1);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    for (int i = 0; i < 100; ++i) {
        const Vec3 p(u(rng), u(rng), u(rng));
        CHECK(sdf_eval(b, p) == doctest::Approx(sdf_eval(a, p)).epsilon(1e-12));
    }
}
