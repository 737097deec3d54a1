#include "c3dag/dataset.hpp"

#include "c3dag/error.hpp"

#include <json.hpp>

#include <cmath>

namespace c3dag {

using nlohmann::json;

int AnnotationSample::annotated_count() const {
    int n = 0;
    for (const auto& k : keypoints) n += k.annotated;
    return n;
}

AnnotationSample load_annotation(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("annotation is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("annotation must be an object");
    for (const auto& [key, _] : doc.items())
        if (key != "image_size" && key != "species" && key != "keypoints") throw ParseError("unknown field " + key);
    AnnotationSample s;
    const auto size = doc.find("image_size");
    if (size == doc.end() || !size->is_array() || size->size() != 2 || !(*size)[0].is_number_integer() ||
        !(*size)[1].is_number_integer() || (*size)[0].get<int>() <= 0 || (*size)[1].get<int>() <= 0)
        throw ParseError("image_size: expected [width, height] positive integers");
    s.image_size = {(*size)[0].get<int>(), (*size)[1].get<int>()};
    if (auto sp = doc.find("species"); sp != doc.end()) {
        if (!sp->is_string()) throw ParseError("species: expected a string");
        s.species = sp->get<std::string>();
    }
    const auto kps = doc.find("keypoints");
    if (kps == doc.end() || !kps->is_object()) throw ParseError("keypoints: expected an object");
    for (const auto& [name, value] : kps->items())
        if (!keypoint_from_name(name)) throw ParseError("keypoints: unknown keypoint " + name);
    for (Keypoint k : all_keypoints()) {
        const std::string name(keypoint_name(k));
        const auto it = kps->find(name);
        if (it == kps->end()) throw ParseError("missing keypoint " + name);
        if (it->is_null()) continue;
        if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
            throw ParseError("keypoint " + name + ": expected [u, v] numbers or null");
        auto& slot = s.keypoints[index_of(k)];
        slot.pixel = Vec2((*it)[0].get<double>(), (*it)[1].get<double>());
        slot.annotated = true;
    }
    return s;
}

std::string save_annotation(const AnnotationSample& sample) {
    json kps = json::object();
    for (Keypoint k : all_keypoints()) {
        const auto& a = sample.keypoints[index_of(k)];
        kps[std::string(keypoint_name(k))] = a.annotated ? json::array({a.pixel.x(), a.pixel.y()}) : json(nullptr);
    }
    return json{{"image_size", {sample.image_size.width, sample.image_size.height}},
                {"species", sample.species},
                {"keypoints", kps}}
        .dump();
}

bool coverage_filter(const AnnotationSample& sample, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("coverage threshold must be in (0, 1]");
    return static_cast<double>(sample.annotated_count()) / kKeypointCount >= threshold;
}

void AugmentParams::validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("augment scale must be positive");
    if (!std::isfinite(rotation_deg) || !translation.allFinite()) throw ConfigError("augment parameters must be finite");
}

Vec2 augment_point(const Vec2& p, Resolution image_size, const AugmentParams& params) {
    const Vec2 c(0.5 * image_size.width, 0.5 * image_size.height);
    const Eigen::Rotation2Dd rot(deg_to_rad(params.rotation_deg));
    return c + rot * (params.scale * (p - c)) + params.translation;
}

AnnotationSample augment(const AnnotationSample& sample, const AugmentParams& params) {
    params.validate();
    AnnotationSample out = sample;
    for (auto& kp : out.keypoints) {
        if (!kp.annotated) continue;
        kp.pixel = augment_point(kp.pixel, sample.image_size, params);
        if (kp.pixel.x() < 0 || kp.pixel.y() < 0 || kp.pixel.x() >= sample.image_size.width ||
            kp.pixel.y() >= sample.image_size.height)
            kp.annotated = false;
    }
    return out;
}

AugmentParams inverse(const AugmentParams& params) {
    params.validate();
    AugmentParams inv;
    inv.scale = 1.0 / params.scale;
    inv.rotation_deg = -params.rotation_deg;
    inv.translation = -(Eigen::Rotation2Dd(deg_to_rad(-params.rotation_deg)) * params.translation) / params.scale;
    return inv;
}

void AugmentRanges::validate() const {
    if (rotation_deg.min > rotation_deg.max) throw ConfigError("rotation range is empty");
    if (scale.min > scale.max || scale.min <= 0.0) throw ConfigError("scale range must be positive and nonempty");
    if (translation_fraction < 0.0) throw ConfigError("translation fraction must be non-negative");
}

namespace {

double uniform(Rng& rng, double lo, double hi) {
    return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

AugmentParams sample_augment(Rng& rng, const AugmentRanges& ranges, Resolution image_size) {
    ranges.validate();
    AugmentParams p;
    p.rotation_deg = uniform(rng, ranges.rotation_deg.min, ranges.rotation_deg.max);
    const double tx = ranges.translation_fraction * image_size.width;
    const double ty = ranges.translation_fraction * image_size.height;
    p.translation = Vec2(uniform(rng, -tx, tx), uniform(rng, -ty, ty));
    p.scale = uniform(rng, ranges.scale.min, ranges.scale.max);
    return p;
}

Rgb8Image annotation_pose_image(const AnnotationSample& sample, const PoseStyle& style) {
    Pose2D pose;
    pose.resolution = sample.image_size;
    for (int k = 0; k < kKeypointCount; ++k) {
        auto& kp = pose.keypoints[k];
        kp.pixel = sample.keypoints[k].pixel;
        kp.visible = kp.in_front = kp.in_frame = sample.keypoints[k].annotated;
    }
    const auto& bones = canonical_bones();
    pose.bones.assign(bones.begin(), bones.end());
    for (const auto& [a, b] : pose.bones)
        pose.drawable.push_back(pose.keypoints[index_of(a)].visible && pose.keypoints[index_of(b)].visible);
    return rasterize_pose(pose, style);
}

std::string CurationReport::to_json() const {
    json species = json::object();
    for (const auto& [name, c] : per_species) species[name] = {{"kept", c.kept}, {"rejected", c.rejected}};
    json errs = json::array();
    for (const auto& [index, message] : errors) errs.push_back({{"index", index}, {"error", message}});
    return json{{"total", total}, {"kept", kept}, {"rejected", rejected}, {"per_species", species}, {"errors", errs}}
        .dump(2);
}

ControlSet make_control_set(const std::vector<std::string>& documents, double threshold, const AugmentRanges& ranges,
                            std::uint64_t seed) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("coverage threshold must be in (0, 1]");
    ranges.validate();
    ControlSet out;
    Rng rng(seed);
    for (std::size_t i = 0; i < documents.size(); ++i) {
        ++out.report.total;
        AnnotationSample sample;
        try {
            sample = load_annotation(documents[i]);
        } catch (const ParseError& e) {
            out.report.errors.emplace_back(static_cast<int>(i), e.what());
            continue;
        }
        auto& counts = out.report.per_species[sample.species];
        if (!coverage_filter(sample, threshold)) {
            ++counts.rejected;
            ++out.report.rejected;
            continue;
        }
        ++counts.kept;
        ++out.report.kept;
        const AnnotationSample aug = augment(sample, sample_augment(rng, ranges, sample.image_size));
        out.images.push_back(annotation_pose_image(aug, default_pose_style(sample.image_size)));
        out.source_index.push_back(static_cast<int>(i));
        out.augmented.push_back(aug);
    }
    return out;
}

}  // namespace c3dag
