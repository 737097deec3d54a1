#include "c3dag/pipeline.hpp"

#include "c3dag/error.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <set>

namespace c3dag {

using nlohmann::json;
namespace fs = std::filesystem;

void PipelineConfig::validate() const {
    camera.validate();
    if (grid_resolution < 2) throw ConfigError("grid.resolution must be at least 2");
    if (channels < 1) throw ConfigError("grid.channels must be positive");
    if (!(density_scale > 0)) throw ConfigError("grid.density_scale must be positive");
    if (n_samples < 1) throw ConfigError("render.n_samples must be positive");
    if (!background.empty() && static_cast<int>(background.size()) != channels)
        throw ConfigError("render.background needs one value per channel");
    for (const StageConfig* s : {&stage1, &stage2}) {
        if (s->iters < 0) throw ConfigError("stage iters must be non-negative");
        if (!(s->lr > 0)) throw ConfigError("stage lr must be positive");
        if (!(0 < s->t_min && s->t_min < s->t_max && s->t_max <= 1)) throw ConfigError("stage needs 0 < t_min < t_max <= 1");
        if (s->control_start < 0 || s->control_start > 1 || s->control_end < 0 || s->control_end > 1)
            throw ConfigError("control scales must lie in [0, 1]");
    }
    if (guidance.mode == TargetMode::silhouette && static_cast<int>(guidance.foreground.size()) != channels)
        throw ConfigError("guidance.foreground needs one value per channel");
    if (guidance.mode == TargetMode::reference && guidance.reference_grid.empty())
        throw ConfigError("guidance.reference_grid is required in reference mode");
    if (guidance.mode == TargetMode::registry && guidance.manifest.empty())
        throw ConfigError("guidance.manifest is required in registry mode");
    if (dump_every < 0) throw ConfigError("dump_every must be non-negative");
    if (eval_cameras < 1) throw ConfigError("eval.cameras must be positive");
}

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> names(known.begin(), known.end());
    for (const auto& [key, _] : obj.items())
        if (!names.count(key)) throw ConfigError("unknown field " + (where.empty() ? key : where + "." + key));
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError((where.empty() ? std::string(key) : where + "." + key) + ": wrong type");
    }
}

Range read_range(const json& obj, const char* key, Range r, const std::string& where) {
    std::array<double, 2> v{r.min, r.max};
    read(obj, key, v, where);
    return {v[0], v[1]};
}

StageConfig read_stage(const json& j, StageConfig s, const std::string& where) {
    reject_unknown(j, where, {"iters", "lr", "t_max", "t_min", "omega_init", "control_start", "control_end"});
    read(j, "iters", s.iters, where);
    read(j, "lr", s.lr, where);
    read(j, "t_max", s.t_max, where);
    read(j, "t_min", s.t_min, where);
    read(j, "omega_init", s.omega_init, where);
    read(j, "control_start", s.control_start, where);
    read(j, "control_end", s.control_end, where);
    return s;
}

json stage_json(const StageConfig& s) {
    return {{"iters", s.iters}, {"lr", s.lr}, {"t_max", s.t_max}, {"t_min", s.t_min}, {"omega_init", s.omega_init},
            {"control_start", s.control_start}, {"control_end", s.control_end}};
}

std::string resolve(const std::string& path, const std::string& base) {
    if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(base) / path).string();
}

const char* mode_name(TargetMode m) {
    switch (m) {
        case TargetMode::silhouette: return "silhouette";
        case TargetMode::reference: return "reference";
        case TargetMode::registry: return "registry";
    }
    return "?";
}

}  // namespace

PipelineConfig parse_config(std::string_view document, const std::string& base_dir) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig c;
    reject_unknown(doc, "", {"skeleton", "body", "seed", "output_dir", "grid", "camera", "render", "schedule",
                             "stage1", "stage2", "guidance", "omit_jacobian", "dump_every", "eval"});
    read(doc, "skeleton", c.skeleton_path, "");
    c.skeleton_path = resolve(c.skeleton_path, base_dir);
    read(doc, "seed", c.seed, "");
    read(doc, "output_dir", c.output_dir, "");
    c.output_dir = resolve(c.output_dir, base_dir);
    read(doc, "omit_jacobian", c.omit_jacobian, "");
    read(doc, "dump_every", c.dump_every, "");
    if (auto b = doc.find("body"); b != doc.end()) {
        try {
            c.body = load_body_config(b->dump());
        } catch (const ParseError& e) {
            throw ConfigError(std::string("body: ") + e.what());
        }
    }
    if (auto g = doc.find("grid"); g != doc.end()) {
        reject_unknown(*g, "grid", {"resolution", "bounds", "padding", "init_density", "init_color", "density_scale", "channels"});
        read(*g, "resolution", c.grid_resolution, "grid");
        read(*g, "padding", c.grid_padding, "grid");
        read(*g, "init_density", c.grid_init.density, "grid");
        read(*g, "init_color", c.grid_init.color, "grid");
        read(*g, "density_scale", c.density_scale, "grid");
        read(*g, "channels", c.channels, "grid");
        if (g->contains("bounds")) {
            std::array<std::array<double, 3>, 2> bb{};
            read(*g, "bounds", bb, "grid");
            c.grid_bounds = Aabb{Vec3(bb[0][0], bb[0][1], bb[0][2]), Vec3(bb[1][0], bb[1][1], bb[1][2])};
        }
    }
    if (auto cam = doc.find("camera"); cam != doc.end()) {
        reject_unknown(*cam, "camera", {"radius", "azimuth", "polar", "fov_y", "near", "far"});
        c.camera.radius = read_range(*cam, "radius", c.camera.radius, "camera");
        c.camera.azimuth = read_range(*cam, "azimuth", c.camera.azimuth, "camera");
        c.camera.polar = read_range(*cam, "polar", c.camera.polar, "camera");
        read(*cam, "fov_y", c.camera.fov_y, "camera");
        read(*cam, "near", c.camera.near, "camera");
        read(*cam, "far", c.camera.far, "camera");
    }
    if (auto r = doc.find("render"); r != doc.end()) {
        reject_unknown(*r, "render", {"width", "height", "n_samples", "background"});
        read(*r, "width", c.camera.resolution.width, "render");
        read(*r, "height", c.camera.resolution.height, "render");
        read(*r, "n_samples", c.n_samples, "render");
        read(*r, "background", c.background, "render");
    }
    if (auto s = doc.find("schedule"); s != doc.end()) {
        reject_unknown(*s, "schedule", {"steps", "beta_start", "beta_end"});
        read(*s, "steps", c.schedule_steps, "schedule");
        read(*s, "beta_start", c.beta_start, "schedule");
        read(*s, "beta_end", c.beta_end, "schedule");
    }
    if (auto s = doc.find("stage1"); s != doc.end()) c.stage1 = read_stage(*s, c.stage1, "stage1");
    if (auto s = doc.find("stage2"); s != doc.end()) c.stage2 = read_stage(*s, c.stage2, "stage2");
    if (auto g = doc.find("guidance"); g != doc.end()) {
        reject_unknown(*g, "guidance", {"mode", "foreground", "reference_grid", "manifest", "prompt"});
        std::string mode = mode_name(c.guidance.mode);
        read(*g, "mode", mode, "guidance");
        if (mode == "silhouette") c.guidance.mode = TargetMode::silhouette;
        else if (mode == "reference") c.guidance.mode = TargetMode::reference;
        else if (mode == "registry") c.guidance.mode = TargetMode::registry;
        else throw ConfigError("guidance.mode: unknown mode " + mode);
        read(*g, "foreground", c.guidance.foreground, "guidance");
        read(*g, "reference_grid", c.guidance.reference_grid, "guidance");
        read(*g, "manifest", c.guidance.manifest, "guidance");
        read(*g, "prompt", c.guidance.prompt, "guidance");
        c.guidance.reference_grid = resolve(c.guidance.reference_grid, base_dir);
        c.guidance.manifest = resolve(c.guidance.manifest, base_dir);
    }
    if (auto e = doc.find("eval"); e != doc.end()) {
        reject_unknown(*e, "eval", {"cameras", "seed"});
        read(*e, "cameras", c.eval_cameras, "eval");
        read(*e, "seed", c.eval_seed, "eval");
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::string& path) {
    return parse_config(read_file(path), fs::path(path).parent_path().string());
}

std::string config_to_json(const PipelineConfig& c) {
    json doc;
    doc["skeleton"] = c.skeleton_path;
    doc["seed"] = c.seed;
    doc["output_dir"] = c.output_dir;
    if (c.body) doc["body"] = json::parse(save_body_config(*c.body));
    json grid = {{"resolution", c.grid_resolution}, {"padding", c.grid_padding}, {"init_density", c.grid_init.density},
                 {"init_color", c.grid_init.color}, {"density_scale", c.density_scale}, {"channels", c.channels}};
    if (c.grid_bounds)
        grid["bounds"] = {{c.grid_bounds->lo.x(), c.grid_bounds->lo.y(), c.grid_bounds->lo.z()},
                          {c.grid_bounds->hi.x(), c.grid_bounds->hi.y(), c.grid_bounds->hi.z()}};
    doc["grid"] = grid;
    doc["camera"] = {{"radius", {c.camera.radius.min, c.camera.radius.max}},
                     {"azimuth", {c.camera.azimuth.min, c.camera.azimuth.max}},
                     {"polar", {c.camera.polar.min, c.camera.polar.max}},
                     {"fov_y", c.camera.fov_y},
                     {"near", c.camera.near},
                     {"far", c.camera.far}};
    doc["render"] = {{"width", c.camera.resolution.width}, {"height", c.camera.resolution.height},
                     {"n_samples", c.n_samples}, {"background", c.background}};
    doc["schedule"] = {{"steps", c.schedule_steps}, {"beta_start", c.beta_start}, {"beta_end", c.beta_end}};
    doc["stage1"] = stage_json(c.stage1);
    doc["stage2"] = stage_json(c.stage2);
    doc["guidance"] = {{"mode", mode_name(c.guidance.mode)}, {"foreground", c.guidance.foreground},
                       {"reference_grid", c.guidance.reference_grid}, {"manifest", c.guidance.manifest},
                       {"prompt", c.guidance.prompt}};
    doc["omit_jacobian"] = c.omit_jacobian;
    doc["dump_every"] = c.dump_every;
    doc["eval"] = {{"cameras", c.eval_cameras}, {"seed", c.eval_seed}};
    return doc.dump(2);
}

std::string RunReport::to_jsonl() const {
    std::string out;
    for (const auto& r : records) {
        out += json{{"stage", stage},         {"iter", r.iter},
                    {"t", r.t},               {"step", r.step},
                    {"omega", r.omega},       {"control_scale", r.control},
                    {"grad_norm", r.grad_norm}, {"opacity_mean", r.opacity_mean},
                    {"residual_norm", r.residual_norm}, {"view", r.view}}
                   .dump();
        out += '\n';
    }
    return out;
}

namespace {

Skeleton load_pipeline_skeleton(const PipelineConfig& c) {
    c.validate();
    return c.skeleton_path.empty() ? default_skeleton() : load_skeleton(read_file(c.skeleton_path));
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)),
      skeleton_(load_pipeline_skeleton(config_)),
      shape_(build_shape(skeleton_, config_.body ? *config_.body : default_body_config(skeleton_))),
      bounds_(config_.grid_bounds ? *config_.grid_bounds : shape_.bounds().padded(config_.grid_padding)),
      schedule_(config_.schedule_steps, config_.beta_start, config_.beta_end) {
    if (!bounds_.strictly_contains(skeleton_.bounds()))
        throw ConfigError("grid bounds must strictly contain the skeleton bounding box");
    if (config_.guidance.mode == TargetMode::registry)
        registry_ = std::make_shared<const TargetRegistry>(TargetRegistry::load(config_.guidance.manifest));
    if (config_.guidance.mode == TargetMode::reference) {
        reference_ = load_grid(read_file(config_.guidance.reference_grid));
        if (reference_->channels() != config_.channels)
            throw ConfigError("reference grid channel count differs from grid.channels");
    }
}

RadianceGrid Pipeline::initial_grid() const {
    const int r = config_.grid_resolution;
    return init_grid({r, r, r}, bounds_, config_.grid_init, config_.channels, config_.density_scale);
}

Image Pipeline::depth_control(const Camera& camera) const {
    const DepthMap d = render_depth(shape_, camera);
    Image img(d.width, d.height, 1);
    img.data = d.depth;
    return img;
}

Image Pipeline::pose_control(const Camera& camera) const {
    const Pose2D pose = project_pose(skeleton_, camera);
    return to_image(rasterize_pose(pose, default_pose_style(camera.resolution())));
}

Image Pipeline::target_for(const Camera& camera, const Image* control) const {
    const Resolution res = camera.resolution();
    const int C = config_.channels;
    switch (config_.guidance.mode) {
        case TargetMode::silhouette: {
            // A one-channel control is the depth map of this camera.
            const Image depth = control && control->channels == 1 ? *control : depth_control(camera);
            Image t(res.width, res.height, C);
            for (int j = 0; j < res.height; ++j)
                for (int i = 0; i < res.width; ++i)
                    for (int c = 0; c < C; ++c)
                        t.at(i, j, c) = std::isfinite(depth.at(i, j, 0)) ? config_.guidance.foreground[c]
                                        : config_.background.empty() ? 0.0
                                                                     : config_.background[c];
            return t;
        }
        case TargetMode::reference: {
            RenderOptions o;
            o.n_samples = config_.n_samples;
            o.background = config_.background;
            o.jitter = false;
            return render(*reference_, camera, o, nullptr).color;
        }
        case TargetMode::registry: {
            const Image& img = registry_->lookup(config_.guidance.prompt, classify_view(camera, body_frame(skeleton_)));
            if (img.width != res.width || img.height != res.height)
                throw ConfigError("registry target size differs from the render resolution");
            Image t(res.width, res.height, C);
            for (int j = 0; j < res.height; ++j)
                for (int i = 0; i < res.width; ++i)
                    for (int c = 0; c < C; ++c) t.at(i, j, c) = img.at(i, j, std::min(c, img.channels - 1));
            return t;
        }
    }
    throw ConfigError("unknown guidance mode");
}

StageResult Pipeline::stage1(RadianceGrid grid) const { return run_stage(1, std::move(grid)); }
StageResult Pipeline::stage2(RadianceGrid grid) const { return run_stage(2, std::move(grid)); }

namespace {

void dump_image(const fs::path& path, const Image& img) {
    if (img.channels == 1) {
        DepthMap d{img.width, img.height, img.data};
        write_file(path.string(), encode_png_gray16(d.width, d.height, normalize_depth16(d)));
    } else {
        write_file(path.string(), encode_png(to_rgb8(img)));
    }
}

std::string iter_tag(long iter) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06ld", iter);
    return buf;
}

}  // namespace

StageResult Pipeline::run_stage(int stage, RadianceGrid grid) const {
    const auto start = std::chrono::steady_clock::now();
    const StageConfig& sc = stage == 1 ? config_.stage1 : config_.stage2;
    if (!grid.same_layout(initial_grid())) throw ConfigError("grid layout does not match the pipeline config");
    std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                      static_cast<std::uint32_t>(stage)};
    Rng rng(seq);
    Adam adam(grid.params().size(), {sc.lr});
    // The three guidance branches of one iteration share a camera.
    struct {
        std::mutex mutex;
        std::optional<Camera> camera;
        Image target;
    } cache;
    const OracleGuidance oracle(schedule_, [this, &cache](const GuidanceQuery& q) {
        if (q.view == nullptr || !q.view->camera) throw ContractError("oracle targets need a camera");
        std::lock_guard lock(cache.mutex);
        if (!cache.camera || !(*cache.camera == *q.view->camera)) {
            cache.target = target_for(*q.view->camera, q.view->control);
            cache.camera = q.view->camera;
        }
        return cache.target;
    });
    RenderOptions ro;
    ro.n_samples = config_.n_samples;
    ro.background = config_.background;
    SdsOptions so;
    so.omit_jacobian = config_.omit_jacobian;

    fs::path dump_dir;
    if (!config_.output_dir.empty()) {
        fs::create_directories(config_.output_dir);
        if (config_.dump_every > 0) {
            dump_dir = fs::path(config_.output_dir) / "dumps";
            fs::create_directories(dump_dir);
        }
    }

    StageResult result{std::move(grid), {}};
    RunReport& report = result.report;
    report.stage = stage;
    RenderTape tape;
    const Mat3 frame = body_frame(skeleton_);
    for (long it = 0; it < sc.iters; ++it) {
        const Camera cam = sample_camera(rng, config_.camera);
        ViewContext view;
        view.camera = cam;
        view.view = classify_view(cam, frame);
        const Image control = stage == 1 ? depth_control(cam) : pose_control(cam);
        view.control = &control;
        const RenderedImage img = render(result.grid, cam, ro, &rng, &tape);

        ScheduleState st;
        st.iter = it;
        st.total_iters = sc.iters;
        st.t_max = sc.t_max;
        st.t_min = sc.t_min;
        st.omega_init = sc.omega_init;
        st.control_start = sc.control_start;
        st.control_end = sc.control_end;
        GuidanceQuery q;
        q.prompt = config_.guidance.prompt;
        q.view = &view;

        SdsResult sds;
        try {
            sds = sds_gradient(img.color, oracle, q, st, schedule_, rng, so);
        } catch (const NumericError& e) {
            report.skipped.emplace_back(it, e.what());
            continue;
        }
        const std::vector<double> grad = render_gradient(result.grid, cam, tape, sds.gradient);
        double g2 = 0.0;
        for (double g : grad) g2 += g * g;
        adam.step(result.grid.params(), grad);
        bool finite = std::isfinite(g2);
        for (double p : result.grid.params()) finite = finite && std::isfinite(p);
        if (!finite) {
            report.aborted = true;
            report.abort_reason = "parameters diverged at iteration " + std::to_string(it);
            break;
        }

        IterationRecord rec;
        rec.iter = it;
        rec.t = sds.t;
        rec.step = sds.step;
        rec.omega = sds.omega;
        rec.control = sds.control;
        rec.grad_norm = std::sqrt(g2);
        rec.opacity_mean = img.mean_opacity();
        rec.residual_norm = sds.residual_norm;
        rec.view = std::string(view_name(view.view));
        report.records.push_back(rec);

        if (!dump_dir.empty() && it % config_.dump_every == 0) {
            const std::string base = "stage" + std::to_string(stage) + "_" + iter_tag(it);
            dump_image(dump_dir / (base + "_control.png"), control);
            dump_image(dump_dir / (base + "_render.png"), img.color);
        }
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!config_.output_dir.empty()) {
        const fs::path out(config_.output_dir);
        const std::string tag = "stage" + std::to_string(stage);
        report.checkpoint = (out / (tag + ".grid")).string();
        write_file(report.checkpoint, save_grid(result.grid));
        write_file((out / ("report_" + tag + ".jsonl")).string(), report.to_jsonl());
        json summary = {{"stage", stage},
                        {"iterations", report.records.size()},
                        {"wall_seconds", report.wall_seconds},
                        {"checkpoint", report.checkpoint},
                        {"aborted", report.aborted},
                        {"abort_reason", report.abort_reason},
                        {"skipped", json::array()}};
        for (const auto& [i, why] : report.skipped) summary["skipped"].push_back({{"iter", i}, {"reason", why}});
        write_file((out / ("summary_" + tag + ".json")).string(), summary.dump(2));
    }
    return result;
}

std::vector<Camera> Pipeline::eval_cameras() const {
    Rng rng(config_.eval_seed);
    std::vector<Camera> cams;
    for (int i = 0; i < config_.eval_cameras; ++i) cams.push_back(sample_camera(rng, config_.camera));
    return cams;
}

double Pipeline::silhouette_iou(const RadianceGrid& grid) const {
    RenderOptions o;
    o.n_samples = config_.n_samples;
    o.background = config_.background;
    o.jitter = false;
    long inter = 0, uni = 0;
    for (const Camera& cam : eval_cameras()) {
        const RenderedImage img = render(grid, cam, o, nullptr);
        const DepthMap d = render_depth(shape_, cam);
        for (std::size_t k = 0; k < img.opacity.size(); ++k) {
            const bool a = img.opacity[k] > 0.5, b = std::isfinite(d.depth[k]);
            inter += a && b;
            uni += a || b;
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

double Pipeline::target_mae(const RadianceGrid& grid) const {
    RenderOptions o;
    o.n_samples = config_.n_samples;
    o.background = config_.background;
    o.jitter = false;
    double sum = 0.0;
    std::size_t n = 0;
    for (const Camera& cam : eval_cameras()) {
        const Image a = render(grid, cam, o, nullptr).color;
        const Image b = target_for(cam, nullptr);
        for (std::size_t k = 0; k < a.data.size(); ++k) sum += std::abs(a.data[k] - b.data[k]);
        n += a.data.size();
    }
    return sum / static_cast<double>(n);
}

StageResult stage1_pretrain(const PipelineConfig& config) {
    const Pipeline p(config);
    return p.stage1(p.initial_grid());
}

StageResult stage2_finetune(const PipelineConfig& config, RadianceGrid pretrained) {
    const Pipeline p(config);
    return p.stage2(std::move(pretrained));
}

}  // namespace c3dag
