#pragma once

#include "c3dag/balloon.hpp"
#include "c3dag/skeleton.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace c3dag {

struct EditorOptions {
    std::string state_path;   // optional persistence file (skeleton + body config)
    std::string static_dir;   // optional directory served under /
    int mesh_resolution = 48;
    int preview_size = 256;
};

struct BuiltMesh {
    std::uint64_t revision = 0;  // session revision the mesh was built from
    int resolution = 0;
    std::string obj;
    MeshStats stats;
};

/// Single editing session. Mutations are serialised; readers get snapshots.
/// Copies share the same underlying session.
class SessionState {
public:
    explicit SessionState(Skeleton skeleton = default_skeleton(), std::optional<BodyPartConfig> body = std::nullopt);

    struct Snapshot {
        Skeleton skeleton;
        BodyPartConfig body;
        std::uint64_t revision;
        std::optional<BuiltMesh> mesh;

        bool stale() const { return !mesh || mesh->revision != revision; }
    };

    Snapshot snapshot() const;
    std::uint64_t move_keypoint(Keypoint k, const Vec3& p);
    std::uint64_t set_body(const BodyPartConfig& body);
    std::uint64_t reset();
    /// Builds from one snapshot and stores the result. Throws
    /// DegenerateBoneError on a zero-length bone.
    BuiltMesh build_mesh(int resolution);

    /// {"version": 1, "skeleton": {...}, "body": {...}}
    std::string save() const;
    static SessionState load(std::string_view document);

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

/// HTTP front end of a SessionState.
class EditorService {
public:
    explicit EditorService(EditorOptions options);
    ~EditorService();
    EditorService(const EditorService&) = delete;
    EditorService& operator=(const EditorService&) = delete;

    SessionState& session();

    /// Binds to `port` (0 picks a free port) and returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace c3dag
