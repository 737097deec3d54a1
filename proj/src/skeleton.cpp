#include "c3dag/skeleton.hpp"

#include "c3dag/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace c3dag {

namespace {

using json = nlohmann::json;
using K = Keypoint;

constexpr std::array<std::string_view, kKeypointCount> kNames = {
    "left_eye",         "right_eye",       "nose",           "neck_end",        "front_left_thigh",
    "front_right_thigh", "rear_left_thigh", "rear_right_thigh", "front_left_knee", "front_right_knee",
    "rear_left_knee",   "rear_right_knee", "front_left_paw", "front_right_paw", "rear_left_paw",
    "rear_right_paw",   "back_end",        "tail_end",
};

constexpr std::array<std::string_view, 6> kViewNames = {"front", "left_side", "back", "right_side", "top", "bottom"};

bool is_connected(const std::vector<Bone>& bones) {
    std::array<int, kKeypointCount> parent{};
    for (int i = 0; i < kKeypointCount; ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& [a, b] : bones) parent[find(index_of(a))] = find(index_of(b));
    const int root = find(0);
    for (int i = 1; i < kKeypointCount; ++i)
        if (find(i) != root) return false;
    return true;
}

}  // namespace

std::string_view keypoint_name(Keypoint k) { return kNames[index_of(k)]; }

std::optional<Keypoint> keypoint_from_name(std::string_view name) {
    for (int i = 0; i < kKeypointCount; ++i)
        if (kNames[i] == name) return static_cast<Keypoint>(i);
    return std::nullopt;
}

const std::array<Keypoint, kKeypointCount>& all_keypoints() {
    static const std::array<Keypoint, kKeypointCount> ks = [] {
        std::array<Keypoint, kKeypointCount> out{};
        for (int i = 0; i < kKeypointCount; ++i) out[i] = static_cast<Keypoint>(i);
        return out;
    }();
    return ks;
}

const std::array<Bone, kBoneCount>& canonical_bones() {
    static const std::array<Bone, kBoneCount> bones = {{
        {K::left_eye, K::right_eye},
        {K::left_eye, K::nose},
        {K::right_eye, K::nose},
        {K::nose, K::neck_end},
        {K::neck_end, K::back_end},
        {K::neck_end, K::front_left_thigh},
        {K::neck_end, K::front_right_thigh},
        {K::back_end, K::rear_left_thigh},
        {K::back_end, K::rear_right_thigh},
        {K::front_left_thigh, K::front_left_knee},
        {K::front_right_thigh, K::front_right_knee},
        {K::rear_left_thigh, K::rear_left_knee},
        {K::rear_right_thigh, K::rear_right_knee},
        {K::front_left_knee, K::front_left_paw},
        {K::front_right_knee, K::front_right_paw},
        {K::rear_left_knee, K::rear_left_paw},
        {K::rear_right_knee, K::rear_right_paw},
        {K::back_end, K::tail_end},
    }};
    return bones;
}

Keypoint mirror_keypoint(Keypoint k) {
    switch (k) {
        case K::left_eye: return K::right_eye;
        case K::right_eye: return K::left_eye;
        case K::front_left_thigh: return K::front_right_thigh;
        case K::front_right_thigh: return K::front_left_thigh;
        case K::rear_left_thigh: return K::rear_right_thigh;
        case K::rear_right_thigh: return K::rear_left_thigh;
        case K::front_left_knee: return K::front_right_knee;
        case K::front_right_knee: return K::front_left_knee;
        case K::rear_left_knee: return K::rear_right_knee;
        case K::rear_right_knee: return K::rear_left_knee;
        case K::front_left_paw: return K::front_right_paw;
        case K::front_right_paw: return K::front_left_paw;
        case K::rear_left_paw: return K::rear_right_paw;
        case K::rear_right_paw: return K::rear_left_paw;
        default: return k;
    }
}

Skeleton::Skeleton(std::array<Vec3, kKeypointCount> keypoints, std::vector<Bone> bones)
    : keypoints_(std::move(keypoints)), bones_(std::move(bones)) {
    if (bones_.size() != kBoneCount)
        throw ParseError("expected 18 bones, got " + std::to_string(bones_.size()));
    std::set<std::pair<int, int>> seen;
    for (const auto& [a, b] : bones_) {
        if (a == b) throw ParseError("bone connects " + std::string(keypoint_name(a)) + " to itself");
        const std::pair<int, int> key = std::minmax(index_of(a), index_of(b));
        if (!seen.insert(key).second)
            throw ParseError("duplicate bone " + std::string(keypoint_name(a)) + "-" + std::string(keypoint_name(b)));
    }
    if (!is_connected(bones_)) throw ParseError("bone graph is not connected");
    for (int i = 0; i < kKeypointCount; ++i)
        if (!keypoints_[i].allFinite())
            throw ParseError("keypoint " + std::string(kNames[i]) + " has non-finite coordinates");
}

Skeleton Skeleton::with_keypoint(Keypoint k, const Vec3& p) const {
    auto kps = keypoints_;
    kps[index_of(k)] = p;
    return Skeleton(kps, bones_);
}

Skeleton Skeleton::transformed(const RigidTransform& t) const {
    auto kps = keypoints_;
    for (auto& p : kps) p = t.apply(p);
    return Skeleton(kps, bones_);
}

Aabb Skeleton::bounds() const {
    Aabb box = Aabb::empty();
    for (const auto& p : keypoints_) box.expand(p);
    return box;
}

Skeleton default_skeleton() {
    std::array<Vec3, kKeypointCount> kp{};
    auto set = [&](K k, double x, double y, double z) { kp[index_of(k)] = Vec3(x, y, z); };
    set(K::nose, 0.50, 0.0, 0.44);
    set(K::left_eye, 0.42, 0.05, 0.50);
    set(K::right_eye, 0.42, -0.05, 0.50);
    set(K::neck_end, 0.26, 0.0, 0.38);
    set(K::back_end, -0.24, 0.0, 0.36);
    set(K::tail_end, -0.46, 0.0, 0.28);
    set(K::front_left_thigh, 0.24, 0.08, 0.30);
    set(K::front_right_thigh, 0.24, -0.08, 0.30);
    set(K::front_left_knee, 0.25, 0.08, 0.16);
    set(K::front_right_knee, 0.25, -0.08, 0.16);
    set(K::front_left_paw, 0.26, 0.08, 0.02);
    set(K::front_right_paw, 0.26, -0.08, 0.02);
    set(K::rear_left_thigh, -0.22, 0.08, 0.30);
    set(K::rear_right_thigh, -0.22, -0.08, 0.30);
    set(K::rear_left_knee, -0.25, 0.08, 0.16);
    set(K::rear_right_knee, -0.25, -0.08, 0.16);
    set(K::rear_left_paw, -0.22, 0.08, 0.02);
    set(K::rear_right_paw, -0.22, -0.08, 0.02);
    const auto& bones = canonical_bones();
    return Skeleton(kp, std::vector<Bone>(bones.begin(), bones.end()));
}

std::string_view view_name(ViewDescription v) { return kViewNames[static_cast<int>(v)]; }

std::optional<ViewDescription> view_from_name(std::string_view name) {
    for (int i = 0; i < static_cast<int>(kViewNames.size()); ++i)
        if (kViewNames[i] == name) return static_cast<ViewDescription>(i);
    return std::nullopt;
}

ViewDescription classify_direction(double azimuth_deg, double polar_deg) {
    if (polar_deg < 45.0) return ViewDescription::top;
    if (polar_deg > 135.0) return ViewDescription::bottom;
    double az = std::fmod(azimuth_deg, 360.0);
    if (az < 0.0) az += 360.0;
    if (az <= 45.0 || az > 315.0) return ViewDescription::front;
    if (az <= 135.0) return ViewDescription::left_side;
    if (az <= 225.0) return ViewDescription::back;
    return ViewDescription::right_side;
}

ViewDescription classify_view(const Camera& camera, const Mat3& skeleton_frame) {
    const Vec3 local = skeleton_frame.transpose() * (camera.position() - camera.look_at());
    const SphericalSample s = cartesian_to_spherical(local);
    return classify_direction(s.azimuth, s.polar);
}

HeadVisibility head_visibility(ViewDescription view) {
    switch (view) {
        case ViewDescription::back: return {false, false, false};
        case ViewDescription::left_side: return {true, false, true};
        case ViewDescription::right_side: return {false, true, true};
        default: return {true, true, true};
    }
}

Skeleton load_skeleton(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed skeleton document: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("skeleton document must be an object");
    for (const auto& [key, _] : doc.items())
        if (key != "version" && key != "keypoints" && key != "bones") throw ParseError("unknown field " + key);
    if (!doc.contains("version")) throw ParseError("missing field version");
    if (!doc["version"].is_number_integer() || doc["version"].get<int>() != 1)
        throw ParseError("unsupported version");
    if (!doc.contains("keypoints") || !doc["keypoints"].is_object()) throw ParseError("missing field keypoints");
    if (!doc.contains("bones") || !doc["bones"].is_array()) throw ParseError("missing field bones");

    const json& kps = doc["keypoints"];
    for (const auto& [key, _] : kps.items())
        if (!keypoint_from_name(key)) throw ParseError("unknown keypoint " + key);
    std::array<Vec3, kKeypointCount> points{};
    for (int i = 0; i < kKeypointCount; ++i) {
        const std::string name(kNames[i]);
        if (!kps.contains(name)) throw ParseError("missing keypoint " + name);
        const json& v = kps[name];
        if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); }))
            throw ParseError("keypoint " + name + ": expected [x, y, z] numbers");
        points[i] = Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
    }

    const json& jb = doc["bones"];
    if (jb.size() != kBoneCount) throw ParseError("expected 18 bones, got " + std::to_string(jb.size()));
    std::vector<Bone> bones;
    for (std::size_t i = 0; i < jb.size(); ++i) {
        const json& b = jb[i];
        if (!b.is_array() || b.size() != 2 || !b[0].is_string() || !b[1].is_string())
            throw ParseError("bones[" + std::to_string(i) + "]: expected [name, name]");
        auto a = keypoint_from_name(b[0].get<std::string>());
        auto c = keypoint_from_name(b[1].get<std::string>());
        if (!a || !c) throw ParseError("bones[" + std::to_string(i) + "]: unknown keypoint name");
        bones.emplace_back(*a, *c);
    }
    return Skeleton(points, std::move(bones));
}

std::string save_skeleton(const Skeleton& skeleton) {
    json doc;
    doc["version"] = 1;
    json kps = json::object();
    for (int i = 0; i < kKeypointCount; ++i) {
        const Vec3& p = skeleton.keypoints()[i];
        kps[std::string(kNames[i])] = {p.x(), p.y(), p.z()};
    }
    doc["keypoints"] = std::move(kps);
    json bones = json::array();
    for (const auto& [a, b] : skeleton.bones()) bones.push_back({keypoint_name(a), keypoint_name(b)});
    doc["bones"] = std::move(bones);
    return doc.dump(2) + "\n";
}

}  // namespace c3dag
