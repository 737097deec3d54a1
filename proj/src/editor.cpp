#include "c3dag/editor.hpp"

#include "c3dag/control.hpp"
#include "c3dag/error.hpp"
#include "c3dag/image.hpp"

#include <httplib.h>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <mutex>
#include <shared_mutex>

namespace c3dag {

using nlohmann::json;

struct SessionState::Impl {
    Impl(Skeleton s, BodyPartConfig b) : skeleton(std::move(s)), body(std::move(b)) {}

    mutable std::shared_mutex mutex;
    Skeleton skeleton;
    BodyPartConfig body;
    std::uint64_t revision = 0;
    std::optional<BuiltMesh> mesh;
};

SessionState::SessionState(Skeleton skeleton, std::optional<BodyPartConfig> body)
    : impl_(std::make_shared<Impl>(skeleton, body ? *body : default_body_config(skeleton))) {}

SessionState::Snapshot SessionState::snapshot() const {
    std::shared_lock lock(impl_->mutex);
    return {impl_->skeleton, impl_->body, impl_->revision, impl_->mesh};
}

std::uint64_t SessionState::move_keypoint(Keypoint k, const Vec3& p) {
    std::unique_lock lock(impl_->mutex);
    impl_->skeleton = impl_->skeleton.with_keypoint(k, p);
    return ++impl_->revision;
}

std::uint64_t SessionState::set_body(const BodyPartConfig& body) {
    body.validate();
    std::unique_lock lock(impl_->mutex);
    impl_->body = body;
    return ++impl_->revision;
}

std::uint64_t SessionState::reset() {
    std::unique_lock lock(impl_->mutex);
    impl_->skeleton = default_skeleton();
    impl_->body = default_body_config(impl_->skeleton);
    return ++impl_->revision;
}

BuiltMesh SessionState::build_mesh(int resolution) {
    const Snapshot snap = snapshot();
    BuiltMesh built;
    built.revision = snap.revision;
    built.resolution = resolution;
    const TriMesh mesh = extract_mesh(build_shape(snap.skeleton, snap.body), resolution);
    built.obj = export_obj(mesh);
    built.stats = mesh_stats(mesh);
    std::unique_lock lock(impl_->mutex);
    if (!impl_->mesh || impl_->mesh->revision <= built.revision) impl_->mesh = built;
    return built;
}

std::string SessionState::save() const {
    const Snapshot snap = snapshot();
    return json{{"version", 1},
                {"skeleton", json::parse(save_skeleton(snap.skeleton))},
                {"body", json::parse(save_body_config(snap.body))}}
        .dump(2);
}

SessionState SessionState::load(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("state is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("skeleton")) throw ParseError("skeleton: missing");
    const Skeleton sk = load_skeleton(doc["skeleton"].dump());
    std::optional<BodyPartConfig> body;
    if (doc.contains("body")) body = load_body_config(doc["body"].dump(), default_body_config(sk));
    return SessionState(sk, body);
}

namespace {

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& field = "") {
    json body = {{"error", message}};
    if (!field.empty()) body["field"] = field;
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

json mesh_json(const BuiltMesh& m) {
    return {{"mesh_id", "r" + std::to_string(m.revision) + "-" + std::to_string(m.resolution)},
            {"revision", m.revision},
            {"resolution", m.resolution},
            {"vertices", m.stats.vertices},
            {"triangles", m.stats.triangles},
            {"watertight", m.stats.watertight()},
            {"components", m.stats.components},
            {"area", m.stats.area}};
}

json skeleton_response(const SessionState::Snapshot& s) {
    return {{"revision", s.revision},
            {"skeleton", json::parse(save_skeleton(s.skeleton))},
            {"body", json::parse(save_body_config(s.body))},
            {"mesh_revision", s.mesh ? json(s.mesh->revision) : json(nullptr)},
            {"stale", s.stale()}};
}

// Missing parameters keep the default; malformed ones throw a field-tagged error.
struct FieldError {
    std::string field;
    std::string message;
};

double query_number(const httplib::Request& req, const char* name, double fallback) {
    if (!req.has_param(name)) return fallback;
    const std::string v = req.get_param_value(name);
    double out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
        throw FieldError{name, std::string(name) + ": expected a number"};
    return out;
}

Camera preview_camera(const httplib::Request& req, int size) {
    const double az = query_number(req, "azimuth", 0.0);
    const double polar = query_number(req, "polar", 90.0);
    const double radius = query_number(req, "radius", 1.5);
    if (!(radius > 0)) throw FieldError{"radius", "radius: must be positive"};
    if (!(polar > 0 && polar < 180)) throw FieldError{"polar", "polar: must lie in (0, 180)"};
    return camera_from_spherical({radius, az, polar}, 45.0, {size, size});
}

}  // namespace

struct EditorService::Impl {
    EditorOptions options;
    SessionState session;
    httplib::Server server;

    void persist() {
        if (!options.state_path.empty()) write_file(options.state_path, session.save());
    }

    template <typename F>
    void guarded(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const FieldError& e) {
            send_error(res, 400, e.message, e.field);
        } catch (const DegenerateBoneError& e) {
            send_error(res, 422, e.what());
        } catch (const ParseError& e) {
            send_error(res, 400, e.what(), "body");
        } catch (const ConfigError& e) {
            send_error(res, 400, e.what(), "body");
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    }

    void routes() {
        server.Get("/api/skeleton", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(skeleton_response(session.snapshot()).dump(), "application/json");
        });

        server.Put(R"(/api/skeleton/keypoint/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto k = keypoint_from_name(req.matches[1].str());
                if (!k) return send_error(res, 404, "unknown keypoint " + req.matches[1].str());
                json body;
                try {
                    body = json::parse(req.body);
                } catch (const json::parse_error&) {
                    throw FieldError{"body", "body: expected [x, y, z] numbers"};
                }
                if (!body.is_array() || body.size() != 3 || !body[0].is_number() || !body[1].is_number() ||
                    !body[2].is_number())
                    throw FieldError{"body", "body: expected [x, y, z] numbers"};
                const Vec3 p(body[0].get<double>(), body[1].get<double>(), body[2].get<double>());
                if (!p.allFinite()) throw FieldError{"body", "body: coordinates must be finite"};
                const auto rev = session.move_keypoint(*k, p);
                persist();
                res.set_content(json{{"revision", rev}}.dump(), "application/json");
            });
        });

        server.Put("/api/config", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto rev = session.set_body(load_body_config(req.body, session.snapshot().body));
                persist();
                res.set_content(json{{"revision", rev}}.dump(), "application/json");
            });
        });

        server.Post("/api/skeleton/reset", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                const auto rev = session.reset();
                persist();
                res.set_content(json{{"revision", rev}}.dump(), "application/json");
            });
        });

        server.Post("/api/mesh", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                int resolution = options.mesh_resolution;
                if (!req.body.empty()) {
                    json body;
                    try {
                        body = json::parse(req.body);
                    } catch (const json::parse_error&) {
                        throw FieldError{"body", "body: expected a JSON object"};
                    }
                    if (!body.is_object()) throw FieldError{"body", "body: expected a JSON object"};
                    if (body.contains("resolution")) {
                        if (!body["resolution"].is_number_integer() || body["resolution"].get<int>() < 16 ||
                            body["resolution"].get<int>() > 256)
                            throw FieldError{"resolution", "resolution: expected an integer in [16, 256]"};
                        resolution = body["resolution"].get<int>();
                    }
                }
                res.set_content(mesh_json(session.build_mesh(resolution)).dump(), "application/json");
            });
        });

        server.Get("/api/mesh.obj", [this](const httplib::Request&, httplib::Response& res) {
            const auto snap = session.snapshot();
            if (!snap.mesh) return send_error(res, 404, "no mesh has been built");
            res.set_header("X-Mesh-Revision", std::to_string(snap.mesh->revision));
            res.set_content(snap.mesh->obj, "model/obj");
        });

        server.Get("/api/preview/pose", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const Camera cam = preview_camera(req, options.preview_size);
                const auto snap = session.snapshot();
                const Pose2D pose = project_pose(snap.skeleton, cam);
                res.set_content(encode_png(rasterize_pose(pose, default_pose_style(cam.resolution()))), "image/png");
            });
        });

        server.Get("/api/preview/depth", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const Camera cam = preview_camera(req, options.preview_size);
                const auto snap = session.snapshot();
                const DepthMap d = render_depth(build_shape(snap.skeleton, snap.body), cam);
                res.set_content(encode_png_gray16(d.width, d.height, normalize_depth16(d)), "image/png");
            });
        });

        server.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
            const auto snap = session.snapshot();
            json bundle = {{"version", 1},
                           {"revision", snap.revision},
                           {"skeleton", json::parse(save_skeleton(snap.skeleton))},
                           {"body", json::parse(save_body_config(snap.body))},
                           {"mesh_revision", snap.mesh ? json(snap.mesh->revision) : json(nullptr)},
                           {"obj", snap.mesh ? json(snap.mesh->obj) : json(nullptr)}};
            res.set_header("Content-Disposition", "attachment; filename=\"balloon_animal.json\"");
            res.set_content(bundle.dump(), "application/json");
        });

        if (!options.static_dir.empty()) {
            if (!std::filesystem::is_directory(options.static_dir))
                throw ConfigError("static directory not found: " + options.static_dir);
            server.set_mount_point("/", options.static_dir);
        }
    }
};

namespace {

SessionState initial_session(const EditorOptions& o) {
    if (!o.state_path.empty() && std::filesystem::exists(o.state_path)) return SessionState::load(read_file(o.state_path));
    return SessionState();
}

}  // namespace

EditorService::EditorService(EditorOptions options)
    : impl_(new Impl{options, initial_session(options), {}}) {
    if (options.mesh_resolution < 16) throw ConfigError("mesh resolution must be at least 16");
    if (options.preview_size < 1) throw ConfigError("preview size must be positive");
    impl_->routes();
}

EditorService::~EditorService() = default;

SessionState& EditorService::session() { return impl_->session; }

int EditorService::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool EditorService::listen_after_bind() { return impl_->server.listen_after_bind(); }
void EditorService::stop() { impl_->server.stop(); }
void EditorService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace c3dag
