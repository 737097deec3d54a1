#include "c3dag/error.hpp"
#include "c3dag/skeleton.hpp"

#include <doctest.h>

#include <json.hpp>

#include <set>

using namespace c3dag;
using json = nlohmann::json;

TEST_CASE("keypoint vocabulary") {
    std::set<std::string_view> names;
    for (Keypoint k : all_keypoints()) {
        names.insert(keypoint_name(k));
        CHECK(keypoint_from_name(keypoint_name(k)) == k);
    }
    CHECK(names.size() == 18);
    CHECK_FALSE(keypoint_from_name("left_ear").has_value());
}

TEST_CASE("default skeleton") {
    const Skeleton s = default_skeleton();
    CHECK(s.bones().size() == 18);
    for (Keypoint k : all_keypoints()) {
        const Vec3 p = s[k];
        const Vec3 m = s[mirror_keypoint(k)];
        CHECK(std::abs(p.x() - m.x()) < 1e-9);
        CHECK(std::abs(p.y() + m.y()) < 1e-9);
        CHECK(std::abs(p.z() - m.z()) < 1e-9);
    }
    const Aabb b = s.bounds();
    CHECK(b.extent().norm() == doctest::Approx(1.0).epsilon(0.15));
    CHECK(b.lo.z() >= 0.0);
    CHECK(b.lo.z() < 0.05);
    CHECK(s[Keypoint::nose].x() > s[Keypoint::tail_end].x());  // faces +x
    CHECK(s[Keypoint::left_eye].y() > 0.0);
}

TEST_CASE("skeleton invariants are enforced") {
    const Skeleton s = default_skeleton();
    auto bones = s.bones();
    bones.pop_back();
    CHECK_THROWS_WITH_AS(Skeleton(s.keypoints(), bones), "expected 18 bones, got 17", ParseError);
    bones.push_back(bones.front());
    CHECK_THROWS_AS(Skeleton(s.keypoints(), bones), ParseError);
    // 18 edges but the tail is disconnected: replace back_end-tail_end by a duplicate-free cycle edge.
    bones = s.bones();
    bones.back() = {Keypoint::front_left_paw, Keypoint::rear_left_paw};
    CHECK_THROWS_WITH_AS(Skeleton(s.keypoints(), bones), "bone graph is not connected", ParseError);
}

TEST_CASE("classify_view bins") {
    CHECK(classify_direction(0, 90) == ViewDescription::front);
    CHECK(classify_direction(180, 90) == ViewDescription::back);
    CHECK(classify_direction(90, 90) == ViewDescription::left_side);
    CHECK(classify_direction(270, 90) == ViewDescription::right_side);
    CHECK(classify_direction(77, 20) == ViewDescription::top);
    CHECK(classify_direction(300, 170) == ViewDescription::bottom);
    // half-open boundaries
    CHECK(classify_direction(45, 90) == ViewDescription::front);
    CHECK(classify_direction(135, 90) == ViewDescription::left_side);
    CHECK(classify_direction(225, 90) == ViewDescription::back);
    CHECK(classify_direction(315, 90) == ViewDescription::right_side);
    CHECK(classify_direction(315.0001, 90) == ViewDescription::front);
    CHECK(classify_direction(10, 45) == ViewDescription::front);

    const Camera front = camera_from_spherical({2.0, 0.0, 90.0}, 45, {64, 64});
    CHECK(classify_view(front) == ViewDescription::front);
    const Camera back = camera_from_spherical({2.0, 180.0, 90.0}, 45, {64, 64});
    CHECK(classify_view(back) == ViewDescription::back);
    const Camera top = camera_from_spherical({2.0, 123.0, 20.0}, 45, {64, 64});
    CHECK(classify_view(top) == ViewDescription::top);
    // A body frame rotated by 180 degrees about z turns the front camera into a back view.
    Mat3 turned = Eigen::AngleAxisd(3.14159265358979323846, Vec3::UnitZ()).toRotationMatrix();
    CHECK(classify_view(front, turned) == ViewDescription::back);
}

TEST_CASE("classify_view is piecewise constant away from bin edges") {
    Rng rng(3);
    std::uniform_real_distribution<double> az(0, 360), pol(0, 180);
    for (int i = 0; i < 5000; ++i) {
        const double a = az(rng), p = pol(rng);
        const auto v = classify_direction(a, p);
        bool near_edge = std::abs(p - 45) < 1e-5 || std::abs(p - 135) < 1e-5;
        for (double e : {45.0, 135.0, 225.0, 315.0, 0.0, 360.0}) near_edge |= std::abs(a - e) < 1e-5;
        if (near_edge) continue;
        CHECK(classify_direction(a + 1e-6, p) == v);
        CHECK(classify_direction(a - 1e-6, p) == v);
    }
}

TEST_CASE("head visibility table") {
    CHECK(head_visibility(ViewDescription::front) == HeadVisibility{true, true, true});
    CHECK(head_visibility(ViewDescription::back) == HeadVisibility{false, false, false});
    CHECK(head_visibility(ViewDescription::left_side) == HeadVisibility{true, false, true});
    CHECK(head_visibility(ViewDescription::right_side) == HeadVisibility{false, true, true});
    CHECK(head_visibility(ViewDescription::top) == HeadVisibility{true, true, true});
    CHECK(head_visibility(ViewDescription::bottom) == HeadVisibility{true, true, true});
}

TEST_CASE("skeleton document round trip is lossless") {
    Rng rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    Skeleton s = default_skeleton();
    for (Keypoint k : all_keypoints()) s = s.with_keypoint(k, s[k] + Vec3(u(rng), u(rng), u(rng)) * 1e-3);
    CHECK(load_skeleton(save_skeleton(s)) == s);
    CHECK(load_skeleton(save_skeleton(default_skeleton())) == default_skeleton());
}

TEST_CASE("skeleton document errors name the field") {
    json doc = json::parse(save_skeleton(default_skeleton()));
    {
        json d = doc;
        d["keypoints"].erase("tail_end");
        CHECK_THROWS_WITH_AS(load_skeleton(d.dump()), "missing keypoint tail_end", ParseError);
    }
    {
        json d = doc;
        d["bones"].erase(d["bones"].end() - 1);
        CHECK_THROWS_WITH_AS(load_skeleton(d.dump()), "expected 18 bones, got 17", ParseError);
    }
    {
        json d = doc;
        d["keypoints"]["nose"] = {1.0, "x", 2.0};
        CHECK_THROWS_WITH_AS(load_skeleton(d.dump()), "keypoint nose: expected [x, y, z] numbers", ParseError);
    }
    {
        json d = doc;
        d["colour"] = "red";
        CHECK_THROWS_WITH_AS(load_skeleton(d.dump()), "unknown field colour", ParseError);
    }
    CHECK_THROWS_AS(load_skeleton("{not json"), ParseError);
}
