#include "c3dag/balloon.hpp"

#include "c3dag/error.hpp"
#include "mc_tables.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace c3dag {

namespace {

using json = nlohmann::json;
using K = Keypoint;

constexpr std::array<std::string_view, 3> kKindNames = {"ellipsoid", "capped_cylinder", "cone"};
constexpr std::array<std::string_view, 6> kPartNames = {"head", "torso", "limb", "tail", "snout", "other"};

double sd_ellipsoid(const Vec3& p, const Vec3& r) {
    const double k = p.cwiseQuotient(r).norm();
    return (k - 1.0) * r.minCoeff();
}

double sd_capped_cylinder(const Vec3& p, double radius, double half_length) {
    const double dx = std::hypot(p.x(), p.y()) - radius;
    const double dy = std::abs(p.z()) - half_length;
    const double inside = std::min(std::max(dx, dy), 0.0);
    const double outside = std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
    return inside + outside;
}

// Exact capped cone with base radius r1 at z = 0 and apex (radius 0) at z = h.
double sd_cone(const Vec3& p, double r1, double h) {
    const double hh = 0.5 * h;
    const Vec2 q(std::hypot(p.x(), p.y()), p.z() - hh);
    const Vec2 k1(0.0, hh);
    const Vec2 k2(-r1, 2.0 * hh);
    const Vec2 ca(q.x() - std::min(q.x(), q.y() < 0.0 ? r1 : 0.0), std::abs(q.y()) - hh);
    const double t = std::clamp((k1 - q).dot(k2) / k2.squaredNorm(), 0.0, 1.0);
    const Vec2 cb = q - k1 + k2 * t;
    const double s = (cb.x() < 0.0 && ca.y() < 0.0) ? -1.0 : 1.0;
    return s * std::sqrt(std::min(ca.squaredNorm(), cb.squaredNorm()));
}

Vec3 any_perpendicular(const Vec3& a) {
    const Vec3 h = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    return a.cross(h).normalized();
}

// Orthonormal frame whose column `axis_index` is `axis`; `hint` fixes the roll.
Mat3 frame_with_axis(const Vec3& axis, const Vec3& hint, int axis_index) {
    const Vec3 a = axis.normalized();
    Vec3 h = hint - hint.dot(a) * a;
    h = h.norm() > 1e-9 ? h.normalized() : any_perpendicular(a);
    Mat3 r;
    if (axis_index == 0) {
        r.col(0) = a;
        r.col(1) = h;
        r.col(2) = a.cross(h);
    } else {
        r.col(2) = a;
        r.col(1) = h;
        r.col(0) = h.cross(a);
    }
    return r;
}

std::string bone_label(const Bone& b) {
    return std::string(keypoint_name(b.first)) + "–" + std::string(keypoint_name(b.second));
}

constexpr std::array<Bone, 8> kLimbBones = {{
    {K::front_left_thigh, K::front_left_knee},
    {K::front_right_thigh, K::front_right_knee},
    {K::rear_left_thigh, K::rear_left_knee},
    {K::rear_right_thigh, K::rear_right_knee},
    {K::front_left_knee, K::front_left_paw},
    {K::front_right_knee, K::front_right_paw},
    {K::rear_left_knee, K::rear_left_paw},
    {K::rear_right_knee, K::rear_right_paw},
}};

Vec3 lateral_axis(const Skeleton& s) {
    Vec3 l = (s[K::front_left_thigh] - s[K::front_right_thigh]) + (s[K::rear_left_thigh] - s[K::rear_right_thigh]);
    if (l.norm() < 1e-9) l = s[K::left_eye] - s[K::right_eye];
    if (l.norm() < 1e-9) l = Vec3::UnitY();
    return l.normalized();
}

}  // namespace

std::string_view primitive_kind_name(PrimitiveKind k) { return kKindNames[static_cast<int>(k)]; }
std::string_view body_part_name(BodyPart p) { return kPartNames[static_cast<int>(p)]; }

double SdfPrimitive::eval(const Vec3& world_point) const {
    const Vec3 p = frame.apply_inverse(world_point);
    switch (kind) {
        case PrimitiveKind::ellipsoid: return sd_ellipsoid(p, params);
        case PrimitiveKind::capped_cylinder: return sd_capped_cylinder(p, params[0], params[1]);
        case PrimitiveKind::cone: return sd_cone(p, params[0], params[1]);
    }
    return std::numeric_limits<double>::infinity();
}

Aabb SdfPrimitive::bounds() const {
    Vec3 lo, hi;
    switch (kind) {
        case PrimitiveKind::ellipsoid:
            lo = -params;
            hi = params;
            break;
        case PrimitiveKind::capped_cylinder:
            lo = Vec3(-params[0], -params[0], -params[1]);
            hi = Vec3(params[0], params[0], params[1]);
            break;
        case PrimitiveKind::cone:
            lo = Vec3(-params[0], -params[0], 0.0);
            hi = Vec3(params[0], params[0], params[1]);
            break;
    }
    Aabb box = Aabb::empty();
    for (int c = 0; c < 8; ++c) {
        const Vec3 corner((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(), (c & 4) ? hi.z() : lo.z());
        box.expand(frame.apply(corner));
    }
    return box;
}

SdfPrimitive make_sphere(const Vec3& center, double radius) {
    SdfPrimitive p;
    p.kind = PrimitiveKind::ellipsoid;
    p.frame.translation = center;
    p.params = Vec3::Constant(radius);
    return p;
}

Aabb BalloonShape::bounds() const {
    Aabb box = Aabb::empty();
    for (const auto& p : primitives) {
        const Aabb b = p.bounds();
        box.expand(b.lo);
        box.expand(b.hi);
    }
    return box;
}

void BodyPartConfig::validate() const {
    if (!((head_radii.array() > 0.0).all())) throw ConfigError("head_radii must be positive");
    if (!((torso_radii.array() > 0.0).all())) throw ConfigError("torso_radii must be positive");
    if (!(limb_radius > 0.0)) throw ConfigError("limb_radius must be positive");
    if (!(tail_base_radius > 0.0)) throw ConfigError("tail_base_radius must be positive");
    if (!(snout_base_radius > 0.0)) throw ConfigError("snout_base_radius must be positive");
}

BodyPartConfig load_body_config(std::string_view document, const BodyPartConfig& base) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(document);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("body config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("body config must be an object");
    BodyPartConfig c = base;
    for (const auto& [key, value] : doc.items()) {
        if (key == "head_radii" || key == "torso_radii") {
            if (!value.is_array() || value.size() != 3 || !value[0].is_number() || !value[1].is_number() ||
                !value[2].is_number())
                throw ParseError(key + ": expected [a, b, c] numbers");
            (key == "head_radii" ? c.head_radii : c.torso_radii) =
                Vec3(value[0].get<double>(), value[1].get<double>(), value[2].get<double>());
        } else if (key == "limb_radius" || key == "tail_base_radius" || key == "snout_base_radius") {
            if (!value.is_number()) throw ParseError(key + ": expected a number");
            (key == "limb_radius" ? c.limb_radius : key == "tail_base_radius" ? c.tail_base_radius : c.snout_base_radius) =
                value.get<double>();
        } else {
            throw ParseError("unknown field " + key);
        }
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ParseError(e.what());
    }
    return c;
}

std::string save_body_config(const BodyPartConfig& c) {
    return nlohmann::json{{"head_radii", {c.head_radii.x(), c.head_radii.y(), c.head_radii.z()}},
                          {"torso_radii", {c.torso_radii.x(), c.torso_radii.y(), c.torso_radii.z()}},
                          {"limb_radius", c.limb_radius},
                          {"tail_base_radius", c.tail_base_radius},
                          {"snout_base_radius", c.snout_base_radius}}
        .dump();
}

BodyPartConfig default_body_config(const Skeleton& s) {
    BodyPartConfig c;
    const Vec3 spine = s[K::neck_end] - s[K::back_end];
    const Vec3 axis = spine.norm() > 1e-9 ? Vec3(spine.normalized()) : Vec3::UnitX();
    const Vec3 lat = lateral_axis(s);
    double lateral = 0.0;
    for (K k : {K::front_left_thigh, K::front_right_thigh, K::rear_left_thigh, K::rear_right_thigh}) {
        Vec3 d = s[k] - s[K::back_end];
        d -= d.dot(axis) * axis;
        lateral = std::max(lateral, std::abs(d.dot(lat)));
    }
    const double minor = std::max(lateral + c.limb_radius, 2.0 * c.limb_radius);
    c.torso_radii = Vec3(0.5 * spine.norm() + c.limb_radius, minor, minor);
    return c;
}

BalloonShape build_shape(const Skeleton& s, const BodyPartConfig& config) {
    config.validate();
    for (const auto& b : s.bones())
        if ((s[b.first] - s[b.second]).norm() < 1e-9) throw DegenerateBoneError("degenerate bone " + bone_label(b));

    const Vec3 lat = lateral_axis(s);
    BalloonShape shape;

    // Head: centroid of eyes and nose, pulled towards the neck.
    const Vec3 eyes_mid = 0.5 * (s[K::left_eye] + s[K::right_eye]);
    const Vec3 centroid = (s[K::left_eye] + s[K::right_eye] + s[K::nose]) / 3.0;
    const double eye_nose = (s[K::nose] - eyes_mid).norm();
    Vec3 to_neck = s[K::neck_end] - centroid;
    to_neck = to_neck.norm() > 1e-12 ? Vec3(to_neck.normalized()) : Vec3::Zero();
    const Vec3 head_center = centroid + 0.25 * eye_nose * to_neck;
    Vec3 nose_dir = s[K::nose] - head_center;
    if (nose_dir.norm() < 1e-9) nose_dir = s[K::nose] - s[K::neck_end];
    {
        SdfPrimitive p;
        p.kind = PrimitiveKind::ellipsoid;
        p.frame = {frame_with_axis(nose_dir, lat, 0), head_center};
        p.params = config.head_radii;
        p.part = BodyPart::head;
        shape.primitives.push_back(p);
    }
    {
        const Vec3 spine = s[K::neck_end] - s[K::back_end];
        SdfPrimitive p;
        p.kind = PrimitiveKind::ellipsoid;
        p.frame = {frame_with_axis(spine, lat, 0), 0.5 * (s[K::neck_end] + s[K::back_end])};
        p.params = Vec3(0.5 * spine.norm() + config.limb_radius, config.torso_radii.y(), config.torso_radii.z());
        p.part = BodyPart::torso;
        p.bone = Bone{K::neck_end, K::back_end};
        shape.primitives.push_back(p);
    }
    for (const Bone& b : kLimbBones) {
        const Vec3 d = s[b.second] - s[b.first];
        SdfPrimitive p;
        p.kind = PrimitiveKind::capped_cylinder;
        p.frame = {frame_with_axis(d, lat, 2), 0.5 * (s[b.first] + s[b.second])};
        p.params = Vec3(config.limb_radius, 0.5 * d.norm(), 0.0);
        p.part = BodyPart::limb;
        p.bone = b;
        shape.primitives.push_back(p);
    }
    auto add_cone = [&](const Vec3& base, const Vec3& apex, double radius, BodyPart part, std::optional<Bone> bone) {
        const Vec3 d = apex - base;
        if (d.norm() < 1e-9) {
            const std::string what = bone ? bone_label(*bone) : std::string(body_part_name(part));
            throw DegenerateBoneError("degenerate bone " + what);
        }
        SdfPrimitive p;
        p.kind = PrimitiveKind::cone;
        p.frame = {frame_with_axis(d, lat, 2), base};
        p.params = Vec3(radius, d.norm(), 0.0);
        p.part = part;
        p.bone = bone;
        shape.primitives.push_back(p);
    };
    add_cone(s[K::back_end], s[K::tail_end], config.tail_base_radius, BodyPart::tail, Bone{K::back_end, K::tail_end});
    add_cone(head_center, s[K::nose], config.snout_base_radius, BodyPart::snout, std::nullopt);
    return shape;
}

double sdf_eval(const BalloonShape& shape, const Vec3& p) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& prim : shape.primitives) d = std::min(d, prim.eval(p));
    return d;
}

MeshStats mesh_stats(const TriMesh& mesh) {
    MeshStats st;
    st.vertices = mesh.vertices.size();
    st.triangles = mesh.triangles.size();
    std::map<std::pair<int, int>, std::pair<int, int>> edges;  // undirected -> (count, orientation sum)
    std::vector<int> parent(mesh.vertices.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    st.min_triangle_area = mesh.triangles.empty() ? 0.0 : std::numeric_limits<double>::infinity();
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        const double area = 0.5 * (b - a).cross(c - a).norm();
        st.area += area;
        st.min_triangle_area = std::min(st.min_triangle_area, area);
        st.signed_volume += a.dot(b.cross(c)) / 6.0;
        for (int e = 0; e < 3; ++e) {
            const int u = t[e];
            const int v = t[(e + 1) % 3];
            auto& rec = edges[std::minmax(u, v)];
            rec.first += 1;
            rec.second += u < v ? 1 : -1;
            parent[find(u)] = find(v);
        }
    }
    st.edges = edges.size();
    for (const auto& [_, rec] : edges) {
        if (rec.first == 1) ++st.boundary_edges;
        if (rec.first > 2) ++st.nonmanifold_edges;
        if (rec.first == 2 && rec.second != 0) ++st.misoriented_edges;
    }
    std::vector<char> used(mesh.vertices.size(), 0);
    for (const auto& t : mesh.triangles)
        for (int v : t) used[v] = 1;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        if (used[v] && find(static_cast<int>(v)) == static_cast<int>(v)) ++st.components;
    return st;
}

TriMesh extract_mesh(const BalloonShape& shape, int grid_resolution) {
    if (shape.primitives.empty()) throw DomainError("cannot extract a mesh from an empty shape");
    if (grid_resolution < 16) throw DomainError("grid_resolution must be at least 16");

    const int n = grid_resolution;
    const Aabb box = shape.bounds();
    const Vec3 cell = box.extent() / static_cast<double>(n - 4);
    const Vec3 origin = box.lo - 2.0 * cell;
    const int np = n + 1;
    auto node = [&](int i, int j, int k) { return (static_cast<std::size_t>(k) * np + j) * np + i; };
    auto position = [&](int i, int j, int k) {
        return Vec3(origin.x() + i * cell.x(), origin.y() + j * cell.y(), origin.z() + k * cell.z());
    };

    std::vector<double> values(static_cast<std::size_t>(np) * np * np);
    for (int k = 0; k < np; ++k)
        for (int j = 0; j < np; ++j)
            for (int i = 0; i < np; ++i) values[node(i, j, k)] = sdf_eval(shape, position(i, j, k));

    // Corner offsets and edge endpoints in the table's numbering.
    static constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                          {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    static constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                         {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
    // Keeps edge vertices away from grid nodes so no triangle collapses.
    constexpr double kEdgeClamp = 1e-3;

    TriMesh mesh;
    std::vector<int> edge_vertex(values.size() * 3, -1);
    auto vertex_on_edge = [&](int ci, int cj, int ck, int e) {
        const int* a = kCorner[kEdge[e][0]];
        const int* b = kCorner[kEdge[e][1]];
        int ia = ci + a[0], ja = cj + a[1], ka = ck + a[2];
        int ib = ci + b[0], jb = cj + b[1], kb = ck + b[2];
        if (node(ib, jb, kb) < node(ia, ja, ka)) {
            std::swap(ia, ib);
            std::swap(ja, jb);
            std::swap(ka, kb);
        }
        const int axis = (ib != ia) ? 0 : (jb != ja) ? 1 : 2;
        const std::size_t key = node(ia, ja, ka) * 3 + axis;
        if (edge_vertex[key] >= 0) return edge_vertex[key];
        const double va = values[node(ia, ja, ka)];
        const double vb = values[node(ib, jb, kb)];
        const double t = std::clamp(va / (va - vb), kEdgeClamp, 1.0 - kEdgeClamp);
        mesh.vertices.push_back(position(ia, ja, ka) + t * (position(ib, jb, kb) - position(ia, ja, ka)));
        edge_vertex[key] = static_cast<int>(mesh.vertices.size()) - 1;
        return edge_vertex[key];
    };

    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                int code = 0;
                for (int c = 0; c < 8; ++c)
                    if (values[node(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])] < 0.0) code |= 1 << c;
                if (code == 0 || code == 255) continue;
                const int* tri = detail::kMcTriTable[code];
                for (int t = 0; tri[t] != -1; t += 3) {
                    const int v0 = vertex_on_edge(i, j, k, tri[t]);
                    const int v1 = vertex_on_edge(i, j, k, tri[t + 1]);
                    const int v2 = vertex_on_edge(i, j, k, tri[t + 2]);
                    // The table winds clockwise seen from outside; flip to CCW.
                    mesh.triangles.push_back({v0, v2, v1});
                }
            }
        }
    }
    return mesh;
}

std::string export_obj(const TriMesh& mesh) {
    std::string out;
    out.reserve(mesh.vertices.size() * 48 + mesh.triangles.size() * 24);
    char buf[128];
    for (const auto& v : mesh.vertices) {
        const int len = std::snprintf(buf, sizeof buf, "v %.10g %.10g %.10g\n", v.x(), v.y(), v.z());
        out.append(buf, static_cast<std::size_t>(len));
    }
    for (const auto& t : mesh.triangles) {
        const int len = std::snprintf(buf, sizeof buf, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
        out.append(buf, static_cast<std::size_t>(len));
    }
    return out;
}

TriMesh parse_obj(std::string_view text) {
    TriMesh mesh;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x() >> v.y() >> v.z())) throw ParseError("obj line " + std::to_string(lineno) + ": bad vertex");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> t{};
            for (int& idx : t) {
                std::string tok;
                if (!(ls >> tok)) throw ParseError("obj line " + std::to_string(lineno) + ": expected triangle");
                idx = std::stoi(tok.substr(0, tok.find('/'))) - 1;
            }
            mesh.triangles.push_back(t);
        }
    }
    for (const auto& t : mesh.triangles)
        for (int v : t)
            if (v < 0 || v >= static_cast<int>(mesh.vertices.size())) throw ParseError("obj face index out of range");
    return mesh;
}

std::string save_shape(const BalloonShape& shape) {
    json prims = json::array();
    for (const auto& p : shape.primitives) {
        json frame = json::array();
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) {
                if (r == 3) frame.push_back(c == 3 ? 1.0 : 0.0);
                else if (c == 3) frame.push_back(p.frame.translation[r]);
                else frame.push_back(p.frame.rotation(r, c));
            }
        json jp = {{"kind", primitive_kind_name(p.kind)},
                   {"part", body_part_name(p.part)},
                   {"frame", frame},
                   {"params", {p.params.x(), p.params.y(), p.params.z()}}};
        if (p.bone) jp["bone"] = {keypoint_name(p.bone->first), keypoint_name(p.bone->second)};
        prims.push_back(std::move(jp));
    }
    return json{{"version", 1}, {"primitives", prims}}.dump(2) + "\n";
}

BalloonShape load_shape(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed shape document: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("primitives") || !doc["primitives"].is_array())
        throw ParseError("missing field primitives");
    BalloonShape shape;
    for (const auto& jp : doc["primitives"]) {
        SdfPrimitive p;
        const auto kind = jp.value("kind", std::string());
        const auto it = std::find(kKindNames.begin(), kKindNames.end(), kind);
        if (it == kKindNames.end()) throw ParseError("unknown primitive kind " + kind);
        p.kind = static_cast<PrimitiveKind>(it - kKindNames.begin());
        const auto part = jp.value("part", std::string("other"));
        const auto pit = std::find(kPartNames.begin(), kPartNames.end(), part);
        p.part = pit == kPartNames.end() ? BodyPart::other : static_cast<BodyPart>(pit - kPartNames.begin());
        const auto& frame = jp.at("frame");
        if (!frame.is_array() || frame.size() != 16) throw ParseError("frame: expected 16 numbers");
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) p.frame.rotation(r, c) = frame[r * 4 + c].get<double>();
            p.frame.translation[r] = frame[r * 4 + 3].get<double>();
        }
        const auto& params = jp.at("params");
        if (!params.is_array() || params.size() != 3) throw ParseError("params: expected 3 numbers");
        p.params = Vec3(params[0].get<double>(), params[1].get<double>(), params[2].get<double>());
        if (jp.contains("bone")) {
            auto a = keypoint_from_name(jp["bone"][0].get<std::string>());
            auto b = keypoint_from_name(jp["bone"][1].get<std::string>());
            if (!a || !b) throw ParseError("bone: unknown keypoint");
            p.bone = Bone{*a, *b};
        }
        shape.primitives.push_back(p);
    }
    return shape;
}

}  // namespace c3dag
