#pragma once

#include "c3dag/geometry.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace c3dag {

/// The 18 tetrapod keypoints. Birds map their wing chain onto the front
/// thigh/knee/paw slots.
enum class Keypoint : int {
    left_eye,
    right_eye,
    nose,
    neck_end,
    front_left_thigh,
    front_right_thigh,
    rear_left_thigh,
    rear_right_thigh,
    front_left_knee,
    front_right_knee,
    rear_left_knee,
    rear_right_knee,
    front_left_paw,
    front_right_paw,
    rear_left_paw,
    rear_right_paw,
    back_end,
    tail_end,
};

inline constexpr int kKeypointCount = 18;
inline constexpr int kBoneCount = 18;

using Bone = std::pair<Keypoint, Keypoint>;

std::string_view keypoint_name(Keypoint k);
std::optional<Keypoint> keypoint_from_name(std::string_view name);
const std::array<Keypoint, kKeypointCount>& all_keypoints();

/// Canonical 18-edge bone list.
const std::array<Bone, kBoneCount>& canonical_bones();

/// Mirror partner across the sagittal plane (left <-> right); midline
/// keypoints map to themselves.
Keypoint mirror_keypoint(Keypoint k);

inline constexpr int index_of(Keypoint k) { return static_cast<int>(k); }

class Skeleton {
public:
    /// Validates: exactly 18 bones, no duplicates or self-loops, connected.
    Skeleton(std::array<Vec3, kKeypointCount> keypoints, std::vector<Bone> bones);

    const Vec3& operator[](Keypoint k) const { return keypoints_[index_of(k)]; }
    const std::array<Vec3, kKeypointCount>& keypoints() const { return keypoints_; }
    const std::vector<Bone>& bones() const { return bones_; }

    Skeleton with_keypoint(Keypoint k, const Vec3& p) const;
    Skeleton transformed(const RigidTransform& t) const;
    Aabb bounds() const;

    bool operator==(const Skeleton& o) const { return keypoints_ == o.keypoints_ && bones_ == o.bones_; }

private:
    std::array<Vec3, kKeypointCount> keypoints_;
    std::vector<Bone> bones_;
};

/// Canonical quadruped pose: faces +x, feet near z = 0, left side on +y.
Skeleton default_skeleton();

enum class ViewDescription { front, left_side, back, right_side, top, bottom };

std::string_view view_name(ViewDescription v);
std::optional<ViewDescription> view_from_name(std::string_view name);

/// Classifies the camera direction in the skeleton's body frame (columns of
/// `skeleton_frame` are the body axes: forward, left, up).
///   polar < 45 -> top, polar > 135 -> bottom, otherwise by azimuth:
///   (-45, 45] front, (45, 135] left_side, (135, 225] back, (225, 315] right_side.
ViewDescription classify_view(const Camera& camera, const Mat3& skeleton_frame = Mat3::Identity());
ViewDescription classify_direction(double azimuth_deg, double polar_deg);

struct HeadVisibility {
    bool left_eye_visible = true;
    bool right_eye_visible = true;
    bool nose_visible = true;

    bool operator==(const HeadVisibility&) const = default;
};

HeadVisibility head_visibility(ViewDescription view);

/// JSON skeleton document: {"version": 1, "keypoints": {name: [x, y, z]},
/// "bones": [[a, b], ...]}. Unknown fields are rejected with ParseError.
Skeleton load_skeleton(std::string_view document);
std::string save_skeleton(const Skeleton& skeleton);

}  // namespace c3dag
