#pragma once

#include "c3dag/balloon.hpp"
#include "c3dag/image.hpp"
#include "c3dag/skeleton.hpp"

#include <array>

namespace c3dag {

struct DepthOptions {
    double hit_tolerance = 1e-4;
    int max_steps = 128;
};

/// Sphere-traced depth of the union SDF. Throws DomainError for an empty shape.
DepthMap render_depth(const BalloonShape& shape, const Camera& camera, const DepthOptions& options = {});

/// Body axes (forward, left, up) as matrix columns: forward is the horizontal
/// direction from back_end to neck_end, up is +z. Identity when degenerate.
Mat3 body_frame(const Skeleton& skeleton);

struct PoseKeypoint {
    Vec2 pixel = Vec2::Zero();
    double depth = 0.0;
    bool in_front = false;
    bool in_frame = false;
    bool visible = false;
};

struct Pose2D {
    Resolution resolution;
    ViewDescription view = ViewDescription::front;
    std::array<PoseKeypoint, kKeypointCount> keypoints{};
    std::vector<Bone> bones;
    std::vector<bool> drawable;  // per bone: both endpoints visible
};

Pose2D project_pose(const Skeleton& skeleton, const Camera& camera);

struct Rgb8 {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb8&) const = default;
};

struct PoseStyle {
    double disc_radius = 4.0;
    double bone_width = 4.0;
    std::array<Rgb8, kKeypointCount> keypoint_colors{};
    std::array<Rgb8, kBoneCount> bone_colors{};  // indexed like canonical_bones()
};

/// Evenly spaced hues for keypoints (full value) and bones (value 0.6);
/// disc radius and bone width are 4 px at a 512 px wide image, scaled with
/// the width and never below 1 px.
PoseStyle default_pose_style(Resolution resolution);

/// Bones (farther first by mean endpoint depth) then keypoint discs. A pixel
/// is covered when its center is within the radius (half width for bones).
Rgb8Image rasterize_pose(const Pose2D& pose, const PoseStyle& style);

}  // namespace c3dag
