#include "c3dag/control.hpp"

#include "c3dag/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace c3dag {

DepthMap render_depth(const BalloonShape& shape, const Camera& camera, const DepthOptions& options) {
    if (shape.primitives.empty()) throw DomainError("cannot render an empty shape");
    const Resolution res = camera.resolution();
    DepthMap out;
    out.width = res.width;
    out.height = res.height;
    out.depth.assign(static_cast<std::size_t>(res.pixel_count()), std::numeric_limits<double>::infinity());
    const Aabb box = shape.bounds().padded(1e-3);
    for (int j = 0; j < res.height; ++j)
        for (int i = 0; i < res.width; ++i) {
            const Ray ray = pixel_ray(camera, i, j);
            const double cos_fwd = ray.direction.dot(camera.forward());
            RayInterval iv;
            if (!intersect_box(ray, box, iv)) continue;
            double k = std::max({iv.enter, 0.0, camera.near() / cos_fwd});
            const double k_end = std::min(iv.exit, camera.far() / cos_fwd);
            for (int step = 0; step < options.max_steps && k <= k_end; ++step) {
                const double d = sdf_eval(shape, ray.at(k));
                if (d < options.hit_tolerance) {
                    const double depth = k * cos_fwd;
                    if (depth > camera.near() && depth < camera.far())
                        out.depth[static_cast<std::size_t>(j) * res.width + i] = depth;
                    break;
                }
                k += d;
            }
        }
    return out;
}

Mat3 body_frame(const Skeleton& skeleton) {
    Vec3 fwd = skeleton[Keypoint::neck_end] - skeleton[Keypoint::back_end];
    fwd.z() = 0.0;
    if (fwd.norm() < 1e-9) return Mat3::Identity();
    fwd.normalize();
    Mat3 m;
    m.col(0) = fwd;
    m.col(1) = Vec3::UnitZ().cross(fwd);
    m.col(2) = Vec3::UnitZ();
    return m;
}

Pose2D project_pose(const Skeleton& skeleton, const Camera& camera) {
    Pose2D pose;
    pose.resolution = camera.resolution();
    pose.view = classify_view(camera, body_frame(skeleton));
    const HeadVisibility head = head_visibility(pose.view);
    for (Keypoint k : all_keypoints()) {
        const Projection p = project_point(camera, skeleton[k]);
        PoseKeypoint& kp = pose.keypoints[index_of(k)];
        kp.pixel = p.pixel;
        kp.depth = p.depth;
        kp.in_front = p.in_front;
        kp.in_frame = p.in_front && p.pixel.x() >= 0 && p.pixel.y() >= 0 && p.pixel.x() < pose.resolution.width &&
                      p.pixel.y() < pose.resolution.height;
        bool shown = true;
        if (k == Keypoint::left_eye) shown = head.left_eye_visible;
        if (k == Keypoint::right_eye) shown = head.right_eye_visible;
        if (k == Keypoint::nose) shown = head.nose_visible;
        kp.visible = p.in_front && shown;
    }
    pose.bones = skeleton.bones();
    for (const auto& [a, b] : pose.bones)
        pose.drawable.push_back(pose.keypoints[index_of(a)].visible && pose.keypoints[index_of(b)].visible);
    return pose;
}

namespace {

Rgb8 hsv(double h, double s, double v) {
    const double c = v * s;
    const double hp = std::fmod(h, 360.0) / 60.0;
    const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
    double r = 0, g = 0, b = 0;
    if (hp < 1) r = c, g = x;
    else if (hp < 2) r = x, g = c;
    else if (hp < 3) g = c, b = x;
    else if (hp < 4) g = x, b = c;
    else if (hp < 5) r = x, b = c;
    else r = c, b = x;
    const double m = v - c;
    auto q = [m](double t) { return static_cast<std::uint8_t>(std::lround((t + m) * 255.0)); };
    return {q(r), q(g), q(b)};
}

void put(Rgb8Image& img, int i, int j, Rgb8 c) {
    std::uint8_t* p = img.pixel(i, j);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
}

void draw_disc(Rgb8Image& img, const Vec2& center, double radius, Rgb8 color) {
    const int i0 = std::max(0, static_cast<int>(std::floor(center.x() - radius)));
    const int i1 = std::min(img.width - 1, static_cast<int>(std::ceil(center.x() + radius)));
    const int j0 = std::max(0, static_cast<int>(std::floor(center.y() - radius)));
    const int j1 = std::min(img.height - 1, static_cast<int>(std::ceil(center.y() + radius)));
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
            const double dx = i + 0.5 - center.x(), dy = j + 0.5 - center.y();
            if (dx * dx + dy * dy <= radius * radius) put(img, i, j, color);
        }
}

void draw_segment(Rgb8Image& img, const Vec2& a, const Vec2& b, double width, Rgb8 color) {
    const double h = 0.5 * width;
    const int i0 = std::max(0, static_cast<int>(std::floor(std::min(a.x(), b.x()) - h)));
    const int i1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(a.x(), b.x()) + h)));
    const int j0 = std::max(0, static_cast<int>(std::floor(std::min(a.y(), b.y()) - h)));
    const int j1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(a.y(), b.y()) + h)));
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
            const Vec2 p(i + 0.5, j + 0.5);
            const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
            if ((p - (a + t * ab)).squaredNorm() <= h * h) put(img, i, j, color);
        }
}

int bone_slot(const Bone& bone) {
    const auto& canon = canonical_bones();
    for (int k = 0; k < kBoneCount; ++k)
        if (canon[k] == bone || (canon[k].first == bone.second && canon[k].second == bone.first)) return k;
    return -1;
}

}  // namespace

PoseStyle default_pose_style(Resolution resolution) {
    PoseStyle style;
    style.disc_radius = std::max(1.0, 4.0 * resolution.width / 512.0);
    style.bone_width = std::max(1.0, 4.0 * resolution.width / 512.0);
    for (int k = 0; k < kKeypointCount; ++k) style.keypoint_colors[k] = hsv(360.0 * k / kKeypointCount, 1.0, 1.0);
    for (int k = 0; k < kBoneCount; ++k) style.bone_colors[k] = hsv(360.0 * (k + 0.5) / kBoneCount, 1.0, 0.6);
    return style;
}

Rgb8Image rasterize_pose(const Pose2D& pose, const PoseStyle& style) {
    Rgb8Image img(pose.resolution.width, pose.resolution.height);
    std::vector<std::size_t> order(pose.bones.size());
    std::iota(order.begin(), order.end(), 0);
    auto bone_depth = [&](std::size_t b) {
        return pose.keypoints[index_of(pose.bones[b].first)].depth + pose.keypoints[index_of(pose.bones[b].second)].depth;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return bone_depth(x) > bone_depth(y); });
    for (std::size_t b : order) {
        if (b >= pose.drawable.size() || !pose.drawable[b]) continue;
        const int slot = bone_slot(pose.bones[b]);
        const Rgb8 color = slot >= 0 ? style.bone_colors[slot] : Rgb8{128, 128, 128};
        draw_segment(img, pose.keypoints[index_of(pose.bones[b].first)].pixel,
                     pose.keypoints[index_of(pose.bones[b].second)].pixel, style.bone_width, color);
    }
    std::vector<int> kp(kKeypointCount);
    std::iota(kp.begin(), kp.end(), 0);
    std::stable_sort(kp.begin(), kp.end(),
                     [&](int x, int y) { return pose.keypoints[x].depth > pose.keypoints[y].depth; });
    for (int k : kp)
        if (pose.keypoints[k].visible) draw_disc(img, pose.keypoints[k].pixel, style.disc_radius, style.keypoint_colors[k]);
    return img;
}

}  // namespace c3dag
