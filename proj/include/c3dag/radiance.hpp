#pragma once

#include "c3dag/geometry.hpp"
#include "c3dag/image.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace c3dag {

/// Node-centred voxel grid. Each node stores a density pre-activation
/// followed by `channels` colour pre-activations. Density is
/// density_scale * softplus(p), colour is sigmoid(q); both are activated per
/// node and then trilinearly interpolated.
class RadianceGrid {
public:
    RadianceGrid(std::array<int, 3> resolution, const Aabb& bounds, int channels = 3, double density_scale = 1.0);

    const std::array<int, 3>& resolution() const { return resolution_; }
    const Aabb& bounds() const { return bounds_; }
    int channels() const { return channels_; }
    int stride() const { return channels_ + 1; }
    double density_scale() const { return density_scale_; }
    std::size_t node_count() const {
        return static_cast<std::size_t>(resolution_[0]) * resolution_[1] * resolution_[2];
    }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    std::size_t node_index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * resolution_[1] + j) * resolution_[0] + i;
    }
    double& density_param(std::size_t node) { return params_[node * stride()]; }
    double& color_param(std::size_t node, int c) { return params_[node * stride() + 1 + c]; }
    double density(std::size_t node) const;
    double color(std::size_t node, int c) const;
    Vec3 node_position(int i, int j, int k) const;

    bool same_layout(const RadianceGrid& o) const;

private:
    std::array<int, 3> resolution_;
    Aabb bounds_;
    int channels_;
    double density_scale_;
    std::vector<double> params_;
};

struct GridInit {
    double density = -5.0;  // pre-activation
    double color = 0.0;     // pre-activation
};

/// Throws ConfigError for a resolution below 2 or degenerate bounds.
RadianceGrid init_grid(std::array<int, 3> resolution, const Aabb& bounds, const GridInit& init = {}, int channels = 3,
                       double density_scale = 1.0);

double softplus(double x);
double sigmoid(double x);
double softplus_inverse(double y);

struct RenderOptions {
    int n_samples = 64;
    std::vector<double> background;  // empty: zeros
    bool jitter = true;              // stratified offsets; bin centres otherwise
};

struct RenderedImage {
    Image color;
    std::vector<double> opacity;

    double mean_opacity() const;
};

/// Retained sample positions of one render call, consumed by render_gradient.
struct RenderTape {
    std::optional<Camera> camera;
    std::array<int, 3> resolution{};
    Aabb bounds;
    int channels = 0;
    std::vector<double> background;
    std::vector<std::uint32_t> ray_begin;  // pixel -> first sample, size pixels + 1
    std::vector<double> k;
    std::vector<double> delta;
    std::vector<double> activated;  // per-node activated values used by the render
};

/// Quadrature C = sum_i T_i (1 - exp(-tau_i delta_i)) c_i + T_{N+1} * background
/// over stratified samples inside the ray-box interval clipped to the camera
/// near/far range. Spacings partition that interval at sample midpoints.
/// `rng` is required when jittering.
RenderedImage render(const RadianceGrid& grid, const Camera& camera, const RenderOptions& options, Rng* rng,
                     RenderTape* tape = nullptr);

/// Gradient of sum(upstream * color) with respect to grid.params(). Throws
/// ContractError when the tape does not belong to this grid layout and camera.
std::vector<double> render_gradient(const RadianceGrid& grid, const Camera& camera, const RenderTape& tape,
                                    const Image& upstream);

/// Binary checkpoint: "C3DG", version byte, layout header, float32 parameters.
std::string save_grid(const RadianceGrid& grid);
RadianceGrid load_grid(std::string_view bytes);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(std::size_t size, const AdamConfig& config);

    void step(std::vector<double>& params, const std::vector<double>& grad);
    long steps() const { return t_; }

private:
    AdamConfig config_;
    std::vector<double> m_;
    std::vector<double> v_;
    long t_ = 0;
};

}  // namespace c3dag
