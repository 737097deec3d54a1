#pragma once

#include "c3dag/geometry.hpp"
#include "c3dag/skeleton.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace c3dag {

enum class PrimitiveKind { ellipsoid, capped_cylinder, cone };
enum class BodyPart { head, torso, limb, tail, snout, other };

std::string_view primitive_kind_name(PrimitiveKind k);
std::string_view body_part_name(BodyPart p);

/// One SDF primitive in its local frame. `params` holds
///   ellipsoid:       radii (a, b, c) along local x, y, z
///   capped_cylinder: (radius, half_length, unused), axis = local z, centered
///   cone:            (base_radius, height, unused), base disc at local z = 0,
///                    apex at local z = height
struct SdfPrimitive {
    PrimitiveKind kind = PrimitiveKind::ellipsoid;
    RigidTransform frame;
    Vec3 params = Vec3::Ones();
    BodyPart part = BodyPart::other;
    std::optional<Bone> bone;  // skeleton bone realized by this primitive

    double eval(const Vec3& world_point) const;
    Aabb bounds() const;
};

SdfPrimitive make_sphere(const Vec3& center, double radius);

struct BalloonShape {
    std::vector<SdfPrimitive> primitives;

    Aabb bounds() const;
};

struct BodyPartConfig {
    Vec3 head_radii{0.12, 0.10, 0.10};
    /// Torso radii (x, y, z). The x (major) radius is always recomputed from
    /// the neck_end-back_end bone; y and z are used as given.
    Vec3 torso_radii{0.30, 0.13, 0.13};
    double limb_radius = 0.05;
    double tail_base_radius = 0.04;
    double snout_base_radius = 0.06;

    void validate() const;
    bool operator==(const BodyPartConfig&) const = default;
};

/// {"head_radii": [a, b, c], "torso_radii": [a, b, c], "limb_radius",
/// "tail_base_radius", "snout_base_radius"}. Missing fields keep the value
/// from `base`; unknown or malformed fields raise ParseError naming the field.
BodyPartConfig load_body_config(std::string_view document, const BodyPartConfig& base = {});
std::string save_body_config(const BodyPartConfig& config);

/// Defaults with the torso radii derived from the skeleton extent.
BodyPartConfig default_body_config(const Skeleton& skeleton);

/// Head and torso ellipsoids, one cylinder per limb bone, tail and snout
/// cones. Throws DegenerateBoneError naming the first zero-length bone.
BalloonShape build_shape(const Skeleton& skeleton, const BodyPartConfig& config);

/// Union SDF (pointwise min over primitives). +infinity for an empty shape.
double sdf_eval(const BalloonShape& shape, const Vec3& p);

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
};

struct MeshStats {
    std::size_t vertices = 0;
    std::size_t triangles = 0;
    std::size_t edges = 0;
    std::size_t boundary_edges = 0;     // used by one triangle
    std::size_t nonmanifold_edges = 0;  // used by more than two triangles
    std::size_t misoriented_edges = 0;  // shared edge traversed the same way twice
    std::size_t components = 0;
    double area = 0.0;
    double signed_volume = 0.0;
    double min_triangle_area = 0.0;

    long euler_characteristic() const {
        return static_cast<long>(vertices) - static_cast<long>(edges) + static_cast<long>(triangles);
    }
    bool watertight() const { return boundary_edges == 0 && nonmanifold_edges == 0; }
};

MeshStats mesh_stats(const TriMesh& mesh);

/// Uniform-grid marching cubes of the union SDF. `grid_resolution` cells per
/// axis (>= 16); the grid spans the shape bounds padded by two cells.
TriMesh extract_mesh(const BalloonShape& shape, int grid_resolution);

std::string export_obj(const TriMesh& mesh);
/// Minimal OBJ reader (`v` and triangular `f` records).
TriMesh parse_obj(std::string_view text);

/// {"version": 1, "primitives": [{"kind", "part", "frame": 4x4 row-major, "params"}]}
std::string save_shape(const BalloonShape& shape);
BalloonShape load_shape(std::string_view document);

}  // namespace c3dag
