#include "c3dag/diffusion.hpp"

#include "c3dag/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace c3dag {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

NoiseSchedule::NoiseSchedule(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ConfigError("schedule needs at least one step");
    if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end))
        throw ConfigError("beta range must satisfy 0 < beta_start <= beta_end < 1");
    alpha_.resize(steps);
    alpha_bar_.resize(steps);
    double prod = 1.0;
    for (int t = 0; t < steps; ++t) {
        const double beta = steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * t / (steps - 1);
        alpha_[t] = 1.0 - beta;
        prod *= alpha_[t];
        alpha_bar_[t] = prod;
    }
}

int NoiseSchedule::check(int t) const {
    if (t < 1 || t > steps()) throw DomainError("diffusion step " + std::to_string(t) + " outside [1, " +
                                                std::to_string(steps()) + "]");
    return t;
}

int NoiseSchedule::discrete_step(double t) const {
    const long s = std::lround(t * steps());
    return static_cast<int>(std::clamp<long>(s, 1, steps()));
}

std::vector<double> forward_diffuse(const std::vector<double>& x, int t, const std::vector<double>& eps,
                                    const NoiseSchedule& schedule) {
    if (x.size() != eps.size()) throw ContractError("forward_diffuse: x and eps sizes differ");
    const double ab = schedule.alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = a * x[i] + b * eps[i];
    return z;
}

void ScheduleState::validate() const {
    if (!(0.0 < t_min && t_min < t_max && t_max <= 1.0)) throw ConfigError("schedule needs 0 < t_min < t_max <= 1");
    if (total_iters < 1) throw ConfigError("total_iters must be positive");
    if (iter < 0 || iter > total_iters) throw ConfigError("iter must lie in [0, total_iters]");
}

double anneal_timestep(const ScheduleState& s) {
    s.validate();
    return s.t_max - (s.t_max - s.t_min) * std::sqrt(static_cast<double>(s.iter) / s.total_iters);
}

double guidance_scale(const ScheduleState& s) {
    s.validate();
    return s.omega_init * (1.0 + static_cast<double>(s.iter) / s.total_iters);
}

double control_scale(const ScheduleState& s) {
    s.validate();
    return s.control_end +
           (s.control_start - s.control_end) * (1.0 + std::cos(kPi * static_cast<double>(s.iter) / s.total_iters)) / 2.0;
}

std::vector<double> mix_guidance(const std::vector<double>& eps_uncond, const std::vector<double>& eps_cond_nocontrol,
                                 const std::vector<double>& eps_cond_control, double omega, double s) {
    if (eps_uncond.size() != eps_cond_nocontrol.size() || eps_uncond.size() != eps_cond_control.size())
        throw ContractError("mix_guidance: branch sizes differ");
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("control scale must lie in [0, 1]");
    std::vector<double> out(eps_uncond.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double ec = eps_cond_nocontrol[i] + s * (eps_cond_control[i] - eps_cond_nocontrol[i]);
        out[i] = eps_uncond[i] + omega * (ec - eps_uncond[i]);
    }
    return out;
}

OracleGuidance::OracleGuidance(const NoiseSchedule& schedule, TargetFn target)
    : schedule_(schedule), target_(std::move(target)) {
    if (!target_) throw ConfigError("oracle guidance needs a target function");
}

std::vector<double> OracleGuidance::predict_noise(const Image& z, int t, const GuidanceQuery& query) const {
    const Image x = target_(query);
    if (!x.same_shape(z)) throw ContractError("oracle target shape does not match the noisy image");
    const double ab = schedule_.alpha_bar(t);
    const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
    std::vector<double> eps(z.data.size());
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (z.data[i] - a * x.data[i]) / b;
    return eps;
}

TargetRegistry TargetRegistry::load(const std::string& manifest_path) {
    const std::filesystem::path p(manifest_path);
    return parse(read_file(manifest_path), p.parent_path().string());
}

TargetRegistry TargetRegistry::parse(std::string_view manifest, const std::string& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(manifest);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
    }
    const auto entries = doc.find("entries");
    if (entries == doc.end() || !entries->is_array()) throw ParseError("entries: expected an array");
    TargetRegistry reg;
    for (const auto& e : *entries) {
        if (!e.is_object() || !e.contains("prompt") || !e.contains("view") || !e.contains("image") ||
            !e["prompt"].is_string() || !e["view"].is_string() || !e["image"].is_string())
            throw ParseError("entries: each entry needs string prompt, view and image");
        const auto view = view_from_name(e["view"].get<std::string>());
        if (!view) throw ParseError("view: unknown view description " + e["view"].get<std::string>());
        std::filesystem::path img(e["image"].get<std::string>());
        if (img.is_relative() && !base_dir.empty()) img = std::filesystem::path(base_dir) / img;
        reg.add(e["prompt"].get<std::string>(), *view, to_image(decode_png(read_file(img.string()))));
    }
    return reg;
}

void TargetRegistry::add(const std::string& prompt, ViewDescription view, Image image) {
    images_[{prompt, view}] = std::move(image);
}

const Image& TargetRegistry::lookup(const std::string& prompt, ViewDescription view) const {
    const auto it = images_.find({prompt, view});
    if (it == images_.end())
        throw DomainError("no target for prompt '" + prompt + "' and view " + std::string(view_name(view)));
    return it->second;
}

OracleGuidance::TargetFn registry_target(std::shared_ptr<const TargetRegistry> registry) {
    return [registry](const GuidanceQuery& q) -> Image {
        if (q.view == nullptr) throw ContractError("registry targets need a view context");
        return registry->lookup(q.prompt, q.view->view);
    };
}

SdsResult sds_gradient(const Image& x, const GuidanceModel& guidance, const GuidanceQuery& query,
                       const ScheduleState& state, const NoiseSchedule& schedule, Rng& rng,
                       const SdsOptions& options) {
    for (double v : x.data)
        if (!std::isfinite(v)) throw NumericError("rendered image is not finite");
    SdsResult r;
    r.t = anneal_timestep(state);
    r.step = schedule.discrete_step(r.t);
    r.omega = guidance_scale(state);
    r.control = control_scale(state);

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> eps(x.data.size());
    for (double& e : eps) e = normal(rng);
    Image z = x;
    z.data = forward_diffuse(x.data, r.step, eps, schedule);

    GuidanceQuery uncond = query;
    uncond.drop_prompt = true;
    uncond.use_control = false;
    GuidanceQuery cond = query;
    cond.drop_prompt = false;
    cond.use_control = false;
    GuidanceQuery ctrl = query;
    ctrl.drop_prompt = false;
    ctrl.use_control = true;
    const auto e_u = guidance.predict_noise(z, r.step, uncond);
    const auto e_c = guidance.predict_noise(z, r.step, cond);
    const auto e_k = guidance.predict_noise(z, r.step, ctrl);
    const auto eps_hat = mix_guidance(e_u, e_c, e_k, r.omega, r.control);

    const double ab = schedule.alpha_bar(r.step);
    const double w = schedule.sigma2(r.step);
    const double jac = options.omit_jacobian ? 1.0 : std::sqrt(ab);
    r.gradient = x;
    double norm2 = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double res = eps_hat[i] - eps[i];
        if (!std::isfinite(res)) throw NumericError("guidance produced a non-finite noise prediction");
        norm2 += res * res;
        r.gradient.data[i] = w * res * jac;
    }
    r.residual_norm = std::sqrt(norm2);
    return r;
}

double diffusion_loss(const std::vector<double>& eps, const std::vector<double>& eps_pred) {
    if (eps.size() != eps_pred.size()) throw ContractError("diffusion_loss: sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) s += (eps[i] - eps_pred[i]) * (eps[i] - eps_pred[i]);
    return s;
}

}  // namespace c3dag
