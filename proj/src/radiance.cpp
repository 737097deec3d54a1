#include "c3dag/radiance.hpp"

#include "c3dag/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

namespace c3dag {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double softplus_inverse(double y) {
    if (!(y > 0.0)) throw DomainError("softplus_inverse needs a positive argument");
    return y > 30.0 ? y : std::log(std::expm1(y));
}

RadianceGrid::RadianceGrid(std::array<int, 3> resolution, const Aabb& bounds, int channels, double density_scale)
    : resolution_(resolution), bounds_(bounds), channels_(channels), density_scale_(density_scale) {
    for (int r : resolution_)
        if (r < 2) throw ConfigError("grid resolution must be at least 2 per axis");
    if (!((bounds_.hi.array() > bounds_.lo.array()).all()) || !bounds_.lo.allFinite() || !bounds_.hi.allFinite())
        throw ConfigError("grid bounds are degenerate");
    if (channels_ < 1) throw ConfigError("grid needs at least one colour channel");
    if (!(density_scale_ > 0.0)) throw ConfigError("density scale must be positive");
    params_.assign(node_count() * stride(), 0.0);
}

double RadianceGrid::density(std::size_t node) const { return density_scale_ * softplus(params_[node * stride()]); }
double RadianceGrid::color(std::size_t node, int c) const { return sigmoid(params_[node * stride() + 1 + c]); }

Vec3 RadianceGrid::node_position(int i, int j, int k) const {
    const Vec3 t(static_cast<double>(i) / (resolution_[0] - 1), static_cast<double>(j) / (resolution_[1] - 1),
                 static_cast<double>(k) / (resolution_[2] - 1));
    return bounds_.lo + t.cwiseProduct(bounds_.extent());
}

bool RadianceGrid::same_layout(const RadianceGrid& o) const {
    return resolution_ == o.resolution_ && bounds_.lo == o.bounds_.lo && bounds_.hi == o.bounds_.hi &&
           channels_ == o.channels_ && density_scale_ == o.density_scale_;
}

RadianceGrid init_grid(std::array<int, 3> resolution, const Aabb& bounds, const GridInit& init, int channels,
                       double density_scale) {
    RadianceGrid g(resolution, bounds, channels, density_scale);
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        g.density_param(n) = init.density;
        for (int c = 0; c < channels; ++c) g.color_param(n, c) = init.color;
    }
    return g;
}

double RenderedImage::mean_opacity() const {
    double s = 0.0;
    for (double o : opacity) s += o;
    return opacity.empty() ? 0.0 : s / static_cast<double>(opacity.size());
}

namespace {

std::vector<double> activate(const RadianceGrid& g) {
    const auto& p = g.params();
    std::vector<double> act(p.size());
    const int s = g.stride();
    for (std::size_t n = 0; n < g.node_count(); ++n) {
        act[n * s] = g.density_scale() * softplus(p[n * s]);
        for (int c = 1; c < s; ++c) act[n * s + c] = sigmoid(p[n * s + c]);
    }
    return act;
}

struct Lookup {
    std::array<int, 3> res;
    Vec3 lo;
    Vec3 to_grid;

    explicit Lookup(const RadianceGrid& g)
        : res(g.resolution()),
          lo(g.bounds().lo),
          to_grid(Vec3(res[0] - 1, res[1] - 1, res[2] - 1).cwiseQuotient(g.bounds().extent())) {}

    void locate(const Vec3& p, std::size_t node[8], double w[8]) const {
        int base[3];
        double f[3];
        for (int a = 0; a < 3; ++a) {
            const double x = std::clamp((p[a] - lo[a]) * to_grid[a], 0.0, static_cast<double>(res[a] - 1));
            base[a] = std::min(static_cast<int>(x), res[a] - 2);
            f[a] = x - base[a];
        }
        for (int corner = 0; corner < 8; ++corner) {
            const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
            node[corner] = (static_cast<std::size_t>(base[2] + dz) * res[1] + (base[1] + dy)) * res[0] + (base[0] + dx);
            w[corner] = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
        }
    }
};

bool ray_interval(const RadianceGrid& g, const Camera& cam, const Ray& ray, double& enter, double& exit) {
    RayInterval iv;
    if (!intersect_box(ray, g.bounds(), iv)) return false;
    const double cos_fwd = ray.direction.dot(cam.forward());
    enter = std::max({iv.enter, 0.0, cam.near() / cos_fwd});
    exit = std::min(iv.exit, cam.far() / cos_fwd);
    return exit > enter;
}

}  // namespace

RenderedImage render(const RadianceGrid& grid, const Camera& camera, const RenderOptions& options, Rng* rng,
                     RenderTape* tape) {
    if (options.n_samples < 1) throw ConfigError("n_samples must be at least 1");
    if (options.jitter && rng == nullptr) throw ContractError("jittered rendering needs an rng");
    const int C = grid.channels();
    std::vector<double> bg = options.background;
    if (bg.empty()) bg.assign(C, 0.0);
    if (static_cast<int>(bg.size()) != C) throw ConfigError("background must have one value per channel");

    const Resolution res = camera.resolution();
    RenderedImage out;
    out.color = Image(res.width, res.height, C);
    out.opacity.assign(static_cast<std::size_t>(res.pixel_count()), 0.0);
    if (tape) {
        tape->camera = camera;
        tape->resolution = grid.resolution();
        tape->bounds = grid.bounds();
        tape->channels = C;
        tape->background = bg;
        tape->ray_begin.assign(1, 0);
        tape->k.clear();
        tape->delta.clear();
    }
    std::vector<double> act = activate(grid);
    const Lookup look(grid);
    const int s = grid.stride();
    const int N = options.n_samples;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> ks(N), deltas(N), col(C);
    std::size_t node[8];
    double w[8];

    for (int j = 0; j < res.height; ++j)
        for (int i = 0; i < res.width; ++i) {
            const std::size_t pix = static_cast<std::size_t>(j) * res.width + i;
            const Ray ray = pixel_ray(camera, i, j);
            double enter = 0, exit = 0;
            double T = 1.0;
            if (ray_interval(grid, camera, ray, enter, exit)) {
                const double bin = (exit - enter) / N;
                for (int n = 0; n < N; ++n) ks[n] = enter + (n + (options.jitter ? unit(*rng) : 0.5)) * bin;
                for (int n = 0; n < N; ++n) {
                    const double b0 = n == 0 ? enter : 0.5 * (ks[n - 1] + ks[n]);
                    const double b1 = n == N - 1 ? exit : 0.5 * (ks[n] + ks[n + 1]);
                    deltas[n] = b1 - b0;
                }
                for (int n = 0; n < N; ++n) {
                    look.locate(ray.at(ks[n]), node, w);
                    double tau = 0.0;
                    std::fill(col.begin(), col.end(), 0.0);
                    for (int q = 0; q < 8; ++q) {
                        const double* a = &act[node[q] * s];
                        tau += w[q] * a[0];
                        for (int c = 0; c < C; ++c) col[c] += w[q] * a[1 + c];
                    }
                    const double trans = std::exp(-tau * deltas[n]);
                    const double weight = T * (1.0 - trans);
                    for (int c = 0; c < C; ++c) out.color.data[pix * C + c] += weight * col[c];
                    T *= trans;
                }
                if (tape) {
                    tape->k.insert(tape->k.end(), ks.begin(), ks.end());
                    tape->delta.insert(tape->delta.end(), deltas.begin(), deltas.end());
                }
            }
            for (int c = 0; c < C; ++c) out.color.data[pix * C + c] += T * bg[c];
            out.opacity[pix] = 1.0 - T;
            if (tape) tape->ray_begin.push_back(static_cast<std::uint32_t>(tape->k.size()));
        }
    if (tape) tape->activated = std::move(act);
    return out;
}

std::vector<double> render_gradient(const RadianceGrid& grid, const Camera& camera, const RenderTape& tape,
                                    const Image& upstream) {
    const Resolution res = camera.resolution();
    const int C = grid.channels();
    if (!tape.camera || !(*tape.camera == camera)) throw ContractError("render tape was recorded for another camera");
    if (tape.resolution != grid.resolution() || tape.bounds.lo != grid.bounds().lo ||
        tape.bounds.hi != grid.bounds().hi || tape.channels != C)
        throw ContractError("render tape was recorded for another grid layout");
    if (tape.ray_begin.size() != static_cast<std::size_t>(res.pixel_count()) + 1)
        throw ContractError("render tape is incomplete");
    if (upstream.width != res.width || upstream.height != res.height || upstream.channels != C)
        throw ContractError("upstream gradient shape does not match the render");
    if (tape.activated.size() != grid.params().size()) throw ContractError("render tape is incomplete");

    const std::vector<double>& act = tape.activated;
    std::vector<double> gact(act.size(), 0.0);
    const Lookup look(grid);
    const int s = grid.stride();
    std::vector<std::size_t> nodes;
    std::vector<double> weights, tau, col, trans_before, alpha;
    std::vector<double> suffix(C);

    for (int j = 0; j < res.height; ++j)
        for (int i = 0; i < res.width; ++i) {
            const std::size_t pix = static_cast<std::size_t>(j) * res.width + i;
            const std::uint32_t b = tape.ray_begin[pix], e = tape.ray_begin[pix + 1];
            if (b == e) continue;
            const double* g = &upstream.data[pix * C];
            bool any = false;
            for (int c = 0; c < C; ++c) any |= g[c] != 0.0;
            if (!any) continue;
            const int N = static_cast<int>(e - b);
            const Ray ray = pixel_ray(camera, i, j);
            nodes.resize(8 * N);
            weights.resize(8 * N);
            tau.assign(N, 0.0);
            col.assign(static_cast<std::size_t>(N) * C, 0.0);
            trans_before.resize(N + 1);
            alpha.resize(N);
            double T = 1.0;
            for (int n = 0; n < N; ++n) {
                look.locate(ray.at(tape.k[b + n]), &nodes[8 * n], &weights[8 * n]);
                for (int q = 0; q < 8; ++q) {
                    const double* a = &act[nodes[8 * n + q] * s];
                    tau[n] += weights[8 * n + q] * a[0];
                    for (int c = 0; c < C; ++c) col[n * C + c] += weights[8 * n + q] * a[1 + c];
                }
                const double tr = std::exp(-tau[n] * tape.delta[b + n]);
                trans_before[n] = T;
                alpha[n] = 1.0 - tr;
                T *= tr;
            }
            trans_before[N] = T;
            for (int c = 0; c < C; ++c) suffix[c] = tape.background[c] * T;
            for (int n = N - 1; n >= 0; --n) {
                // d color / d(tau_n delta_n) = T_{n+1} c_n - (later contributions + background term)
                double d_optical = 0.0;
                for (int c = 0; c < C; ++c) d_optical += g[c] * (trans_before[n + 1] * col[n * C + c] - suffix[c]);
                const double d_tau = d_optical * tape.delta[b + n];
                const double wgt = trans_before[n] * alpha[n];
                for (int q = 0; q < 8; ++q) {
                    double* ga = &gact[nodes[8 * n + q] * s];
                    const double wq = weights[8 * n + q];
                    ga[0] += wq * d_tau;
                    for (int c = 0; c < C; ++c) ga[1 + c] += wq * g[c] * wgt;
                }
                for (int c = 0; c < C; ++c) suffix[c] += wgt * col[n * C + c];
            }
        }

    const auto& p = grid.params();
    std::vector<double> grad(p.size());
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
        // softplus' = sigmoid = 1 - exp(-softplus)
        grad[n * s] = gact[n * s] * grid.density_scale() * -std::expm1(-act[n * s] / grid.density_scale());
        for (int c = 1; c < s; ++c) {
            const double sg = act[n * s + c];
            grad[n * s + c] = gact[n * s + c] * sg * (1.0 - sg);
        }
    }
    return grad;
}

namespace {

constexpr char kMagic[4] = {'C', '3', 'D', 'G'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kSoftplus = 1;
constexpr std::uint8_t kSigmoid = 1;

template <typename T>
void put(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw ParseError("truncated grid checkpoint");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::string save_grid(const RadianceGrid& grid) {
    std::string out(kMagic, 4);
    put<std::uint8_t>(out, kVersion);
    put<std::uint8_t>(out, kSoftplus);
    put<std::uint8_t>(out, kSigmoid);
    for (int r : grid.resolution()) put<std::int32_t>(out, r);
    put<std::int32_t>(out, grid.channels());
    for (int a = 0; a < 3; ++a) put<double>(out, grid.bounds().lo[a]);
    for (int a = 0; a < 3; ++a) put<double>(out, grid.bounds().hi[a]);
    put<double>(out, grid.density_scale());
    for (double v : grid.params()) put<float>(out, static_cast<float>(v));
    return out;
}

RadianceGrid load_grid(std::string_view bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("not a grid checkpoint");
    std::size_t pos = 4;
    if (get<std::uint8_t>(bytes, pos) != kVersion) throw ParseError("unsupported grid checkpoint version");
    if (get<std::uint8_t>(bytes, pos) != kSoftplus || get<std::uint8_t>(bytes, pos) != kSigmoid)
        throw ParseError("unsupported activation ids");
    std::array<int, 3> res{};
    for (int& r : res) r = get<std::int32_t>(bytes, pos);
    const int channels = get<std::int32_t>(bytes, pos);
    Aabb box;
    for (int a = 0; a < 3; ++a) box.lo[a] = get<double>(bytes, pos);
    for (int a = 0; a < 3; ++a) box.hi[a] = get<double>(bytes, pos);
    const double scale = get<double>(bytes, pos);
    RadianceGrid g(res, box, channels, scale);
    for (double& v : g.params()) v = get<float>(bytes, pos);
    if (pos != bytes.size()) throw ParseError("trailing bytes in grid checkpoint");
    return g;
}

Adam::Adam(std::size_t size, const AdamConfig& config) : config_(config), m_(size, 0.0), v_(size, 0.0) {
    if (!(config_.lr > 0.0)) throw ConfigError("learning rate must be positive");
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw ContractError("optimizer size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grad[i];
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
        params[i] -= config_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.eps);
    }
}

}  // namespace c3dag
