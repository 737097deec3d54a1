#pragma once

#include "c3dag/balloon.hpp"
#include "c3dag/control.hpp"
#include "c3dag/diffusion.hpp"
#include "c3dag/radiance.hpp"

#include <optional>
#include <string>
#include <vector>

namespace c3dag {

struct StageConfig {
    long iters = 10000;
    double lr = 1e-3;
    double t_max = 0.98;
    double t_min = 0.4;
    double omega_init = 50.0;
    double control_start = 1.0;
    double control_end = 0.25;
};

enum class TargetMode { silhouette, reference, registry };

struct GuidanceConfig {
    TargetMode mode = TargetMode::silhouette;
    std::vector<double> foreground{0.9, 0.45, 0.3};  // silhouette colour
    std::string reference_grid;                       // checkpoint path, reference mode
    std::string manifest;                             // registry mode
    std::string prompt = "a balloon animal";
};

struct PipelineConfig {
    std::string skeleton_path;          // empty: default skeleton
    std::optional<BodyPartConfig> body;  // unset: derived from the skeleton
    std::uint64_t seed = 0;
    std::string output_dir;  // empty: nothing is written

    int grid_resolution = 32;
    std::optional<Aabb> grid_bounds;  // unset: balloon shape bounds padded by grid_padding
    double grid_padding = 0.1;
    GridInit grid_init{-6.0, 0.0};
    double density_scale = 10.0;
    int channels = 3;

    CameraSamplingConfig camera;  // its resolution is the render resolution
    int n_samples = 64;
    std::vector<double> background;  // empty: zeros

    int schedule_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;

    StageConfig stage1{10000, 1e-3, 0.98, 0.4, 1.0, 1.0, 1.0};
    StageConfig stage2{};
    GuidanceConfig guidance;
    bool omit_jacobian = false;

    int dump_every = 500;
    int eval_cameras = 8;
    std::uint64_t eval_seed = 20240917;

    void validate() const;
};

/// JSON document; every field is optional and unknown fields are rejected.
/// Relative paths resolve against `base_dir`.
PipelineConfig parse_config(std::string_view document, const std::string& base_dir = "");
PipelineConfig load_config(const std::string& path);
std::string config_to_json(const PipelineConfig& config);

struct IterationRecord {
    long iter = 0;
    double t = 0.0;
    int step = 0;
    double omega = 0.0;
    double control = 0.0;
    double grad_norm = 0.0;
    double opacity_mean = 0.0;
    double residual_norm = 0.0;
    std::string view;
};

struct RunReport {
    int stage = 0;
    std::vector<IterationRecord> records;
    std::vector<std::pair<long, std::string>> skipped;  // iteration, reason
    double wall_seconds = 0.0;
    std::string checkpoint;
    bool aborted = false;
    std::string abort_reason;

    std::string to_jsonl() const;
};

struct StageResult {
    RadianceGrid grid;
    RunReport report;
};

/// Shared state of one optimisation run: skeleton, balloon shape, schedule
/// and guidance targets.
class Pipeline {
public:
    explicit Pipeline(PipelineConfig config);

    const PipelineConfig& config() const { return config_; }
    const Skeleton& skeleton() const { return skeleton_; }
    const BalloonShape& shape() const { return shape_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    const Aabb& grid_bounds() const { return bounds_; }

    RadianceGrid initial_grid() const;

    /// Depth-conditioned pre-training.
    StageResult stage1(RadianceGrid grid) const;
    /// Pose-conditioned fine-tuning under the annealed schedules.
    StageResult stage2(RadianceGrid grid) const;

    std::vector<Camera> eval_cameras() const;
    /// Pooled IoU of (opacity > 0.5) against the depth hit mask of the balloon
    /// shape over the held-out cameras.
    double silhouette_iou(const RadianceGrid& grid) const;
    /// Mean absolute error against the guidance targets on held-out cameras.
    double target_mae(const RadianceGrid& grid) const;

    /// Conditioning images.
    Image depth_control(const Camera& camera) const;
    Image pose_control(const Camera& camera) const;
    Image target_for(const Camera& camera, const Image* control) const;

private:
    StageResult run_stage(int stage, RadianceGrid grid) const;

    PipelineConfig config_;
    Skeleton skeleton_;
    BalloonShape shape_;
    Aabb bounds_;
    NoiseSchedule schedule_;
    std::shared_ptr<const TargetRegistry> registry_;
    std::optional<RadianceGrid> reference_;
};

StageResult stage1_pretrain(const PipelineConfig& config);
StageResult stage2_finetune(const PipelineConfig& config, RadianceGrid pretrained);

}  // namespace c3dag
