// Command-line front end: meshing, conditioning renders, dataset curation,
// optimisation and the editor service.

#include "c3dag/balloon.hpp"
#include "c3dag/control.hpp"
#include "c3dag/dataset.hpp"
#include "c3dag/editor.hpp"
#include "c3dag/error.hpp"
#include "c3dag/image.hpp"
#include "c3dag/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

namespace fs = std::filesystem;
using namespace c3dag;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config_path;
};

struct SourceOptions {
    std::string skeleton_path;
    std::string body_path;
};

struct ViewOptions {
    double radius = 1.5;
    double azimuth = 0.0;
    double polar = 90.0;
    double fov = 45.0;
    int width = 512;
    int height = 512;
};

void add_source_flags(CLI::App* cmd, SourceOptions& s) {
    cmd->add_option("--skeleton", s.skeleton_path, "Skeleton JSON (default: built-in quadruped)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--body", s.body_path, "Body-part config JSON")->check(CLI::ExistingFile);
}

void add_view_flags(CLI::App* cmd, ViewOptions& v) {
    cmd->add_option("--radius", v.radius, "Camera distance from the origin")->check(CLI::PositiveNumber);
    cmd->add_option("--azimuth", v.azimuth, "Degrees from +x towards +y");
    cmd->add_option("--polar", v.polar, "Degrees from +z")->check(CLI::Range(0.0, 180.0));
    cmd->add_option("--fov", v.fov, "Vertical field of view in degrees")->check(CLI::Range(1.0, 179.0));
    cmd->add_option("--width", v.width, "Image width")->check(CLI::PositiveNumber);
    cmd->add_option("--height", v.height, "Image height")->check(CLI::PositiveNumber);
}

// Flags win over the config file, which wins over the built-in defaults.
Skeleton load_source_skeleton(const SourceOptions& s, const Globals& g) {
    std::string path = s.skeleton_path;
    if (path.empty() && !g.config_path.empty()) path = load_config(g.config_path).skeleton_path;
    return path.empty() ? default_skeleton() : load_skeleton(read_file(path));
}

BodyPartConfig load_source_body(const SourceOptions& s, const Globals& g, const Skeleton& skeleton) {
    const BodyPartConfig base = default_body_config(skeleton);
    if (!s.body_path.empty()) return load_body_config(read_file(s.body_path), base);
    if (!g.config_path.empty()) {
        if (auto body = load_config(g.config_path).body) return *body;
    }
    return base;
}

Camera view_camera(const ViewOptions& v) {
    return camera_from_spherical({v.radius, v.azimuth, v.polar}, v.fov, {v.width, v.height});
}

int run_mesh(const Globals& g, const SourceOptions& src, const std::string& out, std::string shape_out, int res) {
    const Skeleton skeleton = load_source_skeleton(src, g);
    const BalloonShape shape = build_shape(skeleton, load_source_body(src, g, skeleton));
    const TriMesh mesh = extract_mesh(shape, res);
    if (shape_out.empty()) shape_out = fs::path(out).replace_extension(".shape.json").string();
    write_file(out, export_obj(mesh));
    write_file(shape_out, save_shape(shape));
    const MeshStats st = mesh_stats(mesh);
    std::cout << out << ": " << st.vertices << " vertices, " << st.triangles << " triangles"
              << (st.watertight() ? ", watertight" : ", open") << '\n';
    return 0;
}

int run_render_depth(const Globals& g, const SourceOptions& src, const ViewOptions& v, const std::string& out) {
    const Skeleton skeleton = load_source_skeleton(src, g);
    const BalloonShape shape = build_shape(skeleton, load_source_body(src, g, skeleton));
    const DepthMap depth = render_depth(shape, view_camera(v));
    if (fs::path(out).extension() == ".pfm")
        write_file(out, encode_pfm(depth));
    else
        write_file(out, encode_png_gray16(depth.width, depth.height, normalize_depth16(depth)));
    return 0;
}

int run_render_pose(const Globals& g, const SourceOptions& src, const ViewOptions& v, const std::string& out) {
    const Skeleton skeleton = load_source_skeleton(src, g);
    const Camera camera = view_camera(v);
    const Pose2D pose = project_pose(skeleton, camera);
    write_file(out, encode_png(rasterize_pose(pose, default_pose_style(camera.resolution()))));
    std::cout << "view: " << view_name(pose.view) << '\n';
    return 0;
}

int run_curate(const Globals& g, const std::vector<std::string>& inputs, const std::string& out_dir,
               double threshold, const AugmentRanges& ranges) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (const auto& e : fs::directory_iterator(in))
                if (e.path().extension() == ".json") files.push_back(e.path());
        } else {
            files.emplace_back(in);
        }
    }
    // Directory listing order is unspecified.
    std::sort(files.begin(), files.end());
    std::vector<std::string> docs;
    docs.reserve(files.size());
    for (const auto& f : files) docs.push_back(read_file(f.string()));

    const ControlSet set = make_control_set(docs, threshold, ranges, g.seed.value_or(0));
    nlohmann::json report = nlohmann::json::parse(set.report.to_json());
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        nlohmann::json index = nlohmann::json::array();
        for (std::size_t i = 0; i < set.images.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "control_%05zu.png", i);
            write_file((fs::path(out_dir) / name).string(), encode_png(set.images[i]));
            index.push_back({{"image", name}, {"source", files[set.source_index[i]].string()}});
        }
        report["outputs"] = index;
        write_file((fs::path(out_dir) / "report.json").string(), report.dump(2));
    }
    std::cout << report.dump(2) << '\n';
    return 0;
}

int run_optimize(const Globals& g, const std::string& stage, const std::string& init, const std::string& out_dir) {
    if (g.config_path.empty()) throw ConfigError("optimize requires --config");
    PipelineConfig config = load_config(g.config_path);
    if (g.seed) config.seed = *g.seed;
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (config.output_dir.empty()) throw ConfigError("output_dir: required by optimize");
    const Pipeline pipeline(config);

    RadianceGrid grid = init.empty() ? pipeline.initial_grid() : load_grid(read_file(init));
    auto finish = [&](const StageResult& r) {
        std::cout << "stage " << r.report.stage << ": " << r.report.records.size() << " iterations, "
                  << r.report.skipped.size() << " skipped, " << r.report.wall_seconds << " s, IoU "
                  << pipeline.silhouette_iou(r.grid) << " -> " << r.report.checkpoint << '\n';
        if (r.report.aborted) throw NumericError("stage " + std::to_string(r.report.stage) + " aborted: " +
                                                 r.report.abort_reason);
        return r.grid;
    };
    if (stage == "1" || stage == "both") grid = finish(pipeline.stage1(std::move(grid)));
    if (stage == "2" || stage == "both") grid = finish(pipeline.stage2(std::move(grid)));
    return 0;
}

int run_serve(const std::string& host, int port, const std::string& state,
              const std::string& static_dir, int mesh_resolution) {
    // Signals go to a dedicated thread; the server loop owns the main thread.
    sigset_t mask;
    sigemptyset(&mask);
    sigaddset(&mask, SIGINT);
    sigaddset(&mask, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &mask, nullptr);

    EditorOptions opts;
    opts.state_path = state;
    opts.static_dir = static_dir;
    opts.mesh_resolution = mesh_resolution;
    EditorService service(opts);
    const int bound = service.bind(host, port);
    if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    std::cout << "listening on http://" << host << ':' << bound << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&mask, &sig);
        service.stop();
    });
    service.listen_after_bind();
    // Wake the waiter if the loop ended on its own.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Balloon-animal 3D generation toolkit"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--config", g.config_path, "Pipeline config JSON")->check(CLI::ExistingFile);

    SourceOptions src;
    ViewOptions view;
    std::string out, shape_out, init, out_dir, stage = "both";
    std::string host = "127.0.0.1", state, static_dir;
    std::vector<std::string> inputs;
    int mesh_res = 64, serve_mesh_res = 48, port = 8080;
    double threshold = 0.3;
    AugmentRanges ranges;

    auto* mesh = app.add_subcommand("mesh", "Balloon mesh (OBJ) and shape description (JSON) from a skeleton");
    add_source_flags(mesh, src);
    mesh->add_option("--out", out, "Output OBJ")->required();
    mesh->add_option("--shape-out", shape_out, "Output shape JSON (default: <out>.shape.json)");
    mesh->add_option("--resolution", mesh_res, "Marching-cubes cells per axis")->check(CLI::Range(16, 512));

    auto* depth = app.add_subcommand("render-depth", "Depth conditioning image (16-bit PNG or PFM)");
    add_source_flags(depth, src);
    add_view_flags(depth, view);
    depth->add_option("--out", out, "Output .png or .pfm")->required();

    auto* pose = app.add_subcommand("render-pose", "Pose conditioning image");
    add_source_flags(pose, src);
    add_view_flags(pose, view);
    pose->add_option("--out", out, "Output PNG")->required();

    auto* curate = app.add_subcommand("curate", "Filter, augment and rasterize keypoint annotations");
    curate->add_option("inputs", inputs, "Annotation files or directories")->required()->check(CLI::ExistingPath);
    curate->add_option("--out", out_dir, "Directory for control images and report.json");
    curate->add_option("--threshold", threshold, "Minimum annotated fraction")->check(CLI::Range(0.0, 1.0));
    curate->add_option("--min-rotation", ranges.rotation_deg.min, "Degrees");
    curate->add_option("--max-rotation", ranges.rotation_deg.max, "Degrees");
    curate->add_option("--max-translation", ranges.translation_fraction, "Fraction of the image size");
    curate->add_option("--min-scale", ranges.scale.min);
    curate->add_option("--max-scale", ranges.scale.max);

    auto* optimize = app.add_subcommand("optimize", "Run the optimisation stages from --config");
    optimize->add_option("--stage", stage, "1, 2 or both")->check(CLI::IsMember({"1", "2", "both"}));
    optimize->add_option("--init", init, "Starting checkpoint (default: empty grid)")->check(CLI::ExistingFile);
    optimize->add_option("--out", out_dir, "Output directory (overrides the config)");

    auto* serve = app.add_subcommand("serve", "Skeleton editor HTTP service");
    serve->add_option("--host", host);
    serve->add_option("--port", port, "0 picks a free port")->check(CLI::Range(0, 65535));
    serve->add_option("--state", state, "Session persistence file");
    serve->add_option("--static", static_dir, "Directory served under /");
    serve->add_option("--mesh-resolution", serve_mesh_res, "Marching-cubes cells per axis")->check(CLI::Range(16, 256));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*mesh) return run_mesh(g, src, out, shape_out, mesh_res);
        if (*depth) return run_render_depth(g, src, view, out);
        if (*pose) return run_render_pose(g, src, view, out);
        if (*curate) return run_curate(g, inputs, out_dir, threshold, ranges);
        if (*optimize) return run_optimize(g, stage, init, out_dir);
        if (*serve) return run_serve(host, port, state, static_dir, serve_mesh_res);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
