#include "c3dag/dataset.hpp"
#include "c3dag/error.hpp"

#include <doctest.h>

using namespace c3dag;

namespace {

AnnotationSample with_annotated(int n, Resolution size = {200, 100}, std::string species = "dog") {
    AnnotationSample s;
    s.image_size = size;
    s.species = std::move(species);
    for (int k = 0; k < n; ++k) {
        s.keypoints[k].annotated = true;
        s.keypoints[k].pixel = Vec2(20 + 8 * k, 30 + 3 * k);
    }
    return s;
}

}  // namespace

TEST_CASE("coverage filter") {
    CHECK_FALSE(coverage_filter(with_annotated(5), 0.30));
    CHECK(coverage_filter(with_annotated(6), 0.30));
    for (double th : {0.01, 0.3, 0.5, 1.0}) CHECK_FALSE(coverage_filter(with_annotated(0), th));
    CHECK(coverage_filter(with_annotated(18), 1.0));
    CHECK_THROWS_AS(coverage_filter(with_annotated(3), 0.0), ConfigError);
    CHECK_THROWS_AS(coverage_filter(with_annotated(3), 1.5), ConfigError);
    // Monotone in the annotated count.
    for (double th = 0.05; th <= 1.0; th += 0.05)
        for (int n = 0; n < 18; ++n)
            if (coverage_filter(with_annotated(n), th)) CHECK(coverage_filter(with_annotated(n + 1), th));
}

TEST_CASE("augment examples") {
    const AnnotationSample s = with_annotated(10);
    const AnnotationSample same = augment(s, AugmentParams{});
    for (int k = 0; k < kKeypointCount; ++k) {
        CHECK(same.keypoints[k].annotated == s.keypoints[k].annotated);
        CHECK((same.keypoints[k].pixel - s.keypoints[k].pixel).norm() == 0.0);
    }
    // 90 degrees about the center of a square image, y-down raster:
    // (cx + 10, cy) -> (cx, cy + 10) by hand.
    const Vec2 p = augment_point(Vec2(60, 50), {100, 100}, AugmentParams{90.0, Vec2::Zero(), 1.0});
    CHECK(p.x() == doctest::Approx(50.0));
    CHECK(p.y() == doctest::Approx(60.0));

    AnnotationSample edge = with_annotated(0, {100, 100});
    edge.keypoints[2] = {Vec2(95, 50), true};
    edge.keypoints[3] = {Vec2(50, 50), true};
    const AnnotationSample blown = augment(edge, AugmentParams{0.0, Vec2::Zero(), 10.0});
    CHECK_FALSE(blown.keypoints[2].annotated);
    CHECK(blown.keypoints[3].annotated);
    CHECK(blown.image_size == edge.image_size);
    CHECK_THROWS_AS(augment(edge, AugmentParams{0.0, Vec2::Zero(), 0.0}), ConfigError);
}

TEST_CASE("augment inverse and annotation count properties") {
    Rng rng(5);
    const AugmentRanges ranges;
    for (int n = 0; n < 200; ++n) {
        AnnotationSample s = with_annotated(18, {160, 120});
        std::uniform_real_distribution<double> u(0, 1);
        for (auto& kp : s.keypoints) kp.pixel = Vec2(160 * u(rng), 120 * u(rng));
        const AugmentParams p = sample_augment(rng, ranges, s.image_size);
        CHECK(p.scale >= 0.7);
        CHECK(p.scale <= 1.3);
        CHECK(std::abs(p.translation.x()) <= 16.0);
        const AnnotationSample a = augment(s, p);
        CHECK(a.annotated_count() <= s.annotated_count());
        const AugmentParams q = inverse(p);
        for (int k = 0; k < kKeypointCount; ++k) {
            if (!a.keypoints[k].annotated) continue;
            CHECK((augment_point(a.keypoints[k].pixel, s.image_size, q) - s.keypoints[k].pixel).norm() < 1e-6);
        }
        const AnnotationSample back = augment(a, q);
        for (int k = 0; k < kKeypointCount; ++k)
            if (back.keypoints[k].annotated) CHECK((back.keypoints[k].pixel - s.keypoints[k].pixel).norm() < 1e-6);
    }
}

TEST_CASE("annotation documents") {
    AnnotationSample s = with_annotated(7, {64, 48}, "owl");
    const AnnotationSample back = load_annotation(save_annotation(s));
    CHECK(back.image_size == s.image_size);
    CHECK(back.species == "owl");
    for (int k = 0; k < kKeypointCount; ++k) {
        CHECK(back.keypoints[k].annotated == s.keypoints[k].annotated);
        if (s.keypoints[k].annotated) CHECK(back.keypoints[k].pixel == s.keypoints[k].pixel);
    }
    CHECK_THROWS_WITH_AS(load_annotation(R"({"image_size":[4,4],"keypoints":{}})"), "missing keypoint left_eye",
                         ParseError);
    CHECK_THROWS_AS(load_annotation(R"({"image_size":[4],"keypoints":{}})"), ParseError);
    CHECK_THROWS_AS(load_annotation("{"), ParseError);
}

TEST_CASE("make_control_set") {
    const ControlSet none = make_control_set({}, 0.3, {}, 1);
    CHECK(none.images.empty());
    CHECK(none.report.total == 0);
    CHECK(none.report.kept == 0);

    const std::vector<std::string> low = {save_annotation(with_annotated(2)), save_annotation(with_annotated(5, {200, 100}, "cat"))};
    const ControlSet rejected = make_control_set(low, 0.3, {}, 1);
    CHECK(rejected.images.empty());
    CHECK(rejected.report.rejected == 2);
    CHECK(rejected.report.per_species.at("cat").rejected == 1);

    const std::vector<std::string> mixed = {save_annotation(with_annotated(12)), "{broken",
                                            save_annotation(with_annotated(3, {200, 100}, "frog")),
                                            save_annotation(with_annotated(18, {200, 100}, "frog"))};
    const ControlSet a = make_control_set(mixed, 0.3, {}, 42);
    const ControlSet b = make_control_set(mixed, 0.3, {}, 42);
    CHECK(a.images.size() == 2);
    CHECK(a.source_index == std::vector<int>{0, 3});
    CHECK(a.report.errors.size() == 1);
    CHECK(a.report.errors[0].first == 1);
    CHECK(a.report.per_species.at("frog").kept == 1);
    CHECK(a.report.per_species.at("frog").rejected == 1);
    REQUIRE(b.images.size() == 2);
    CHECK(a.images[0] == b.images[0]);
    CHECK(a.images[1] == b.images[1]);
    CHECK(a.images[0].width == 200);
    CHECK(a.report.to_json().find("\"kept\": 2") != std::string::npos);
}
