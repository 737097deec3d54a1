#pragma once

#include "c3dag/geometry.hpp"
#include "c3dag/image.hpp"
#include "c3dag/skeleton.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace c3dag {

/// Discrete DDPM schedule with steps t = 1..T, alpha_t = 1 - beta_t and
/// beta linear in t.
class NoiseSchedule {
public:
    explicit NoiseSchedule(int steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2);

    int steps() const { return static_cast<int>(alpha_.size()); }
    double alpha(int t) const { return alpha_.at(check(t) - 1); }
    double alpha_bar(int t) const { return alpha_bar_.at(check(t) - 1); }
    /// Variance of the forward marginal, 1 - alpha_bar.
    double sigma2(int t) const { return 1.0 - alpha_bar(t); }
    /// round(t * T) clamped to [1, T].
    int discrete_step(double t) const;

private:
    int check(int t) const;

    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
};

/// z_t = sqrt(alpha_bar) x + sqrt(1 - alpha_bar) eps. Throws DomainError for
/// a step outside [1, T] and ContractError for mismatched sizes.
std::vector<double> forward_diffuse(const std::vector<double>& x, int t, const std::vector<double>& eps,
                                    const NoiseSchedule& schedule);

struct ScheduleState {
    long iter = 0;
    long total_iters = 1;
    double t_max = 0.98;
    double t_min = 0.4;
    double omega_init = 50.0;
    double control_start = 1.0;
    double control_end = 0.25;

    void validate() const;
};

double anneal_timestep(const ScheduleState& s);
double guidance_scale(const ScheduleState& s);
double control_scale(const ScheduleState& s);

/// eps_c = eps_cond_nocontrol + s (eps_cond_control - eps_cond_nocontrol);
/// result = eps_uncond + omega (eps_c - eps_uncond).
std::vector<double> mix_guidance(const std::vector<double>& eps_uncond, const std::vector<double>& eps_cond_nocontrol,
                                 const std::vector<double>& eps_cond_control, double omega, double s);

/// Camera and conditioning image of the view being optimised.
struct ViewContext {
    std::optional<Camera> camera;
    ViewDescription view = ViewDescription::front;
    const Image* control = nullptr;
};

struct GuidanceQuery {
    std::string prompt;
    const ViewContext* view = nullptr;
    bool drop_prompt = false;
    bool use_control = true;
};

class GuidanceModel {
public:
    virtual ~GuidanceModel() = default;
    /// Noise prediction for a noisy image `z` (same layout as the render) at
    /// discrete step `t`. Implementations must be safe for concurrent calls.
    virtual std::vector<double> predict_noise(const Image& z, int t, const GuidanceQuery& query) const = 0;
};

/// Exact denoiser for a point mass at a per-query target x*:
/// eps = (z - sqrt(alpha_bar) x*) / sqrt(1 - alpha_bar). The target depends
/// only on the view, so the unconditional and conditional branches agree.
class OracleGuidance : public GuidanceModel {
public:
    using TargetFn = std::function<Image(const GuidanceQuery&)>;

    OracleGuidance(const NoiseSchedule& schedule, TargetFn target);

    std::vector<double> predict_noise(const Image& z, int t, const GuidanceQuery& query) const override;
    Image target(const GuidanceQuery& query) const { return target_(query); }

private:
    const NoiseSchedule& schedule_;
    TargetFn target_;
};

/// Targets loaded from {"entries": [{"prompt", "view", "image"}]} where image
/// paths are resolved relative to `base_dir`. Lookups of unknown keys throw
/// DomainError.
class TargetRegistry {
public:
    static TargetRegistry load(const std::string& manifest_path);
    static TargetRegistry parse(std::string_view manifest, const std::string& base_dir);

    void add(const std::string& prompt, ViewDescription view, Image image);
    const Image& lookup(const std::string& prompt, ViewDescription view) const;
    std::size_t size() const { return images_.size(); }

private:
    std::map<std::pair<std::string, ViewDescription>, Image> images_;
};

OracleGuidance::TargetFn registry_target(std::shared_ptr<const TargetRegistry> registry);

struct SdsOptions {
    bool omit_jacobian = false;
};

struct SdsResult {
    Image gradient;  // dL/dx, same layout as x
    double t = 0.0;
    int step = 0;
    double omega = 0.0;
    double control = 0.0;
    double residual_norm = 0.0;
};

/// One-sample SDS: draws eps, diffuses x to the annealed step, mixes the
/// three guidance branches and returns w(t) (eps_hat - eps) d z_t / d x with
/// w(t) = sigma_t^2. Throws NumericError on non-finite guidance output.
SdsResult sds_gradient(const Image& x, const GuidanceModel& guidance, const GuidanceQuery& query,
                       const ScheduleState& state, const NoiseSchedule& schedule, Rng& rng,
                       const SdsOptions& options = {});

/// ||eps - eps_pred||^2.
double diffusion_loss(const std::vector<double>& eps, const std::vector<double>& eps_pred);

}  // namespace c3dag
