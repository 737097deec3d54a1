#pragma once

#include "c3dag/control.hpp"

#include <map>
#include <string>
#include <vector>

namespace c3dag {

struct KeypointAnnotation {
    Vec2 pixel = Vec2::Zero();
    bool annotated = false;
};

struct AnnotationSample {
    Resolution image_size;
    std::array<KeypointAnnotation, kKeypointCount> keypoints{};
    std::string species;

    int annotated_count() const;
};

/// {"image_size": [w, h], "species": "...", "keypoints": {name: [u, v] | null}}
/// with all 18 names present.
AnnotationSample load_annotation(std::string_view document);
std::string save_annotation(const AnnotationSample& sample);

/// Keep iff annotated / 18 >= threshold. Throws ConfigError unless
/// threshold is in (0, 1].
bool coverage_filter(const AnnotationSample& sample, double threshold);

struct AugmentParams {
    double rotation_deg = 0.0;
    Vec2 translation = Vec2::Zero();  // pixels
    double scale = 1.0;

    void validate() const;
};

/// p' = c + R(theta) * s * (p - c) + t about the image center c, in y-down
/// raster coordinates. Keypoints leaving [0, w) x [0, h) become unannotated.
AnnotationSample augment(const AnnotationSample& sample, const AugmentParams& params);
Vec2 augment_point(const Vec2& p, Resolution image_size, const AugmentParams& params);
AugmentParams inverse(const AugmentParams& params);

struct AugmentRanges {
    Range rotation_deg{-30.0, 30.0};
    double translation_fraction = 0.1;  // of the image size, symmetric
    Range scale{0.7, 1.3};

    void validate() const;
};

AugmentParams sample_augment(Rng& rng, const AugmentRanges& ranges, Resolution image_size);

/// Pose image of the annotated keypoints; bones need both endpoints annotated.
Rgb8Image annotation_pose_image(const AnnotationSample& sample, const PoseStyle& style);

struct SpeciesCounts {
    int kept = 0;
    int rejected = 0;
};

struct CurationReport {
    int total = 0;
    int kept = 0;
    int rejected = 0;
    std::map<std::string, SpeciesCounts> per_species;
    std::vector<std::pair<int, std::string>> errors;  // input index, message

    std::string to_json() const;
};

struct ControlSet {
    std::vector<Rgb8Image> images;
    std::vector<int> source_index;
    std::vector<AnnotationSample> augmented;
    CurationReport report;
};

/// Filters, augments and rasterizes annotation documents in input order.
/// Unparseable documents are recorded in the report and skipped.
ControlSet make_control_set(const std::vector<std::string>& documents, double threshold, const AugmentRanges& ranges,
                            std::uint64_t seed);

}  // namespace c3dag
