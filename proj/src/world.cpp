#include "tcwm/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tcwm/errors.hpp"

namespace tcwm {
namespace {

// Random orthogonal matrix via Gram-Schmidt on a Gaussian draw.
Tensor random_orthogonal(std::size_t n, Rng& rng, double scale) {
    std::vector<std::vector<double>> q(n, std::vector<double>(n));
    for (auto& row : q)
        for (auto& v : row) v = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < n; ++k) dot += q[i][k] * q[j][k];
            for (std::size_t k = 0; k < n; ++k) q[i][k] -= dot * q[j][k];
        }
        double norm = 0.0;
        for (double v : q[i]) norm += v * v;
        norm = std::sqrt(norm);
        for (double& v : q[i]) v /= norm;
    }
    Tensor out = Tensor::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = static_cast<Real>(scale * q[i][j]);
    return out;
}

void check_dim(std::span<const Real> v, std::size_t expected, const char* what) {
    if (v.size() != expected) {
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) + ", got " +
                             std::to_string(v.size()));
    }
}

Real proprio_coord(const World& w, std::size_t i, double z) {
    switch (w.spec.proprio) {
        case ProprioMode::identity: return static_cast<Real>(z);
        case ProprioMode::scaled_shifted: return static_cast<Real>(w.proprio_scale[i] * z + w.proprio_shift[i]);
        case ProprioMode::smooth_monotone: return static_cast<Real>(z + 0.3 * std::tanh(z));
    }
    return Real(0);
}

}  // namespace

std::string to_string(DynamicsMode m) { return m == DynamicsMode::linear ? "linear" : "tanh-mlp"; }
std::string to_string(MixingMode m) { return m == MixingMode::linear ? "linear" : "tanh-mlp"; }
std::string to_string(ProprioMode m) {
    switch (m) {
        case ProprioMode::identity: return "identity";
        case ProprioMode::scaled_shifted: return "scaled-shifted";
        case ProprioMode::smooth_monotone: return "smooth-monotone";
    }
    return "identity";
}

DynamicsMode parse_dynamics_mode(const std::string& s) {
    if (s == "linear") return DynamicsMode::linear;
    if (s == "tanh-mlp") return DynamicsMode::tanh_mlp;
    throw ValidationError("unknown dynamics mode '" + s + "'");
}
MixingMode parse_mixing_mode(const std::string& s) {
    if (s == "linear") return MixingMode::linear;
    if (s == "tanh-mlp") return MixingMode::tanh_mlp;
    throw ValidationError("unknown mixing mode '" + s + "'");
}
ProprioMode parse_proprio_mode(const std::string& s) {
    if (s == "identity") return ProprioMode::identity;
    if (s == "scaled-shifted") return ProprioMode::scaled_shifted;
    if (s == "smooth-monotone") return ProprioMode::smooth_monotone;
    throw ValidationError("unknown proprio mode '" + s + "'");
}

void WorldSpec::validate() const {
    if (d_s < 1) throw ValidationError("world: d_s must be >= 1");
    if (d_x < d_s + d_c) throw ValidationError("world: d_x must be >= d_s + d_c");
    if (d_a < 1) throw ValidationError("world: d_a must be >= 1");
    if (sigma_x < 0 || sigma_z < 0) throw ValidationError("world: noise scales must be >= 0");
    if (!(action_low < action_high)) throw ValidationError("world: action_low must be < action_high");
    if (!(state_bound > 0)) throw ValidationError("world: state_bound must be > 0");
}

World build_world(const WorldSpec& spec) {
    spec.validate();
    World w;
    w.spec = spec;
    const std::size_t dz = spec.d_z();
    Rng dyn_rng(derive_seed(spec.seed, 1));
    Rng mix_rng(derive_seed(spec.seed, 2));
    Rng prop_rng(derive_seed(spec.seed, 3));

    // Task block: contracting rotation driven by actions. Distractors: a pure
    // rotation, energy preserving and independent of actions.
    w.dyn_a = Tensor::matrix(dz, dz);
    const Tensor a_ss = random_orthogonal(spec.d_s, dyn_rng, 0.9);
    const Tensor a_cc = random_orthogonal(spec.d_c, dyn_rng, 1.0);
    for (std::size_t i = 0; i < spec.d_s; ++i)
        for (std::size_t j = 0; j < spec.d_s; ++j) w.dyn_a(i, j) = a_ss(i, j);
    for (std::size_t i = 0; i < spec.d_c; ++i)
        for (std::size_t j = 0; j < spec.d_c; ++j) w.dyn_a(spec.d_s + i, spec.d_s + j) = a_cc(i, j);
    w.dyn_b = Tensor::matrix(dz, spec.d_a);
    for (std::size_t i = 0; i < spec.d_s; ++i)
        for (std::size_t j = 0; j < spec.d_a; ++j) w.dyn_b(i, j) = static_cast<Real>(0.3 * dyn_rng.normal());
    w.dyn_net = MlpNet::random({dz + spec.d_a, 32, dz}, dyn_rng);

    w.mix = Tensor::matrix(spec.d_x, dz);
    const double mix_scale = 1.0 / std::sqrt(static_cast<double>(dz));
    for (auto& v : w.mix.values()) v = static_cast<Real>(mix_scale * mix_rng.normal());
    w.mix_net = MlpNet::random({dz, spec.d_x, spec.d_x}, mix_rng, 1.5);
    for (auto& b : w.mix_net.layers[0].bias.values()) b = static_cast<Real>(0.2 * mix_rng.normal());

    w.proprio_scale.resize(spec.d_s);
    w.proprio_shift.resize(spec.d_s);
    for (std::size_t i = 0; i < spec.d_s; ++i) {
        w.proprio_scale[i] = static_cast<Real>(prop_rng.uniform(0.5, 2.0));
        w.proprio_shift[i] = static_cast<Real>(prop_rng.normal());
    }
    return w;
}

bool action_in_box(const WorldSpec& spec, std::span<const Real> a) {
    return std::all_of(a.begin(), a.end(), [&](Real v) { return v >= spec.action_low && v <= spec.action_high; });
}

std::vector<Real> step_true(const World& world, std::span<const Real> z, std::span<const Real> a, Rng& rng) {
    const auto& spec = world.spec;
    check_dim(z, spec.d_z(), "step_true latent");
    check_dim(a, spec.d_a, "step_true action");
    if (!action_in_box(spec, a)) throw DomainError("step_true: action outside action box");
    const std::size_t dz = spec.d_z();
    std::vector<Real> next(dz);
    if (spec.dynamics == DynamicsMode::linear) {
        for (std::size_t i = 0; i < dz; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < dz; ++j) acc += double(world.dyn_a(i, j)) * z[j];
            for (std::size_t j = 0; j < spec.d_a; ++j) acc += double(world.dyn_b(i, j)) * a[j];
            next[i] = static_cast<Real>(acc);
        }
    } else {
        Tensor input({1, dz + spec.d_a});
        std::copy(z.begin(), z.end(), input.data());
        std::copy(a.begin(), a.end(), input.data() + dz);
        const Tensor out = world.dyn_net.forward(input);
        std::copy(out.data(), out.data() + dz, next.begin());
    }
    if (spec.sigma_z > 0) {
        for (auto& v : next) v = static_cast<Real>(v + spec.sigma_z * rng.normal());
    }
    return next;
}

void step_distractors(const World& world, std::span<const Real> z_c, std::span<Real> out, Rng& rng) {
    const auto& spec = world.spec;
    for (std::size_t i = 0; i < spec.d_c; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < spec.d_c; ++j) acc += double(world.dyn_a(spec.d_s + i, spec.d_s + j)) * z_c[j];
        out[i] = static_cast<Real>(acc);
    }
    if (spec.sigma_z > 0) {
        for (std::size_t i = 0; i < spec.d_c; ++i) out[i] = static_cast<Real>(out[i] + spec.sigma_z * rng.normal());
    }
}

std::vector<Real> mixing_mean(const World& world, std::span<const Real> z) {
    const auto& spec = world.spec;
    check_dim(z, spec.d_z(), "emit_embedding latent");
    std::vector<Real> x(spec.d_x);
    if (spec.mixing == MixingMode::linear) {
        for (std::size_t i = 0; i < spec.d_x; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < z.size(); ++j) acc += double(world.mix(i, j)) * z[j];
            x[i] = static_cast<Real>(acc);
        }
    } else {
        const Tensor out = world.mix_net.forward(Tensor({1, z.size()}, std::vector<Real>(z.begin(), z.end())));
        std::copy(out.data(), out.data() + spec.d_x, x.begin());
    }
    return x;
}

std::vector<Real> emit_embedding(const World& world, std::span<const Real> z, Rng& rng) {
    auto x = mixing_mean(world, z);
    if (world.spec.sigma_x > 0) {
        for (auto& v : x) v = static_cast<Real>(v + world.spec.sigma_x * rng.normal());
    }
    return x;
}

std::vector<Real> proprio_of(const World& world, std::span<const Real> z_s) {
    check_dim(z_s, world.spec.d_s, "proprio_of");
    std::vector<Real> s(z_s.size());
    for (std::size_t i = 0; i < z_s.size(); ++i) s[i] = proprio_coord(world, i, z_s[i]);
    return s;
}

std::vector<Real> proprio_inverse(const World& world, std::span<const Real> s_p, double tol) {
    check_dim(s_p, world.spec.d_s, "proprio_inverse");
    std::vector<Real> z(s_p.size());
    for (std::size_t i = 0; i < s_p.size(); ++i) {
        const double target = s_p[i];
        auto m = [&](double v) {
            switch (world.spec.proprio) {
                case ProprioMode::identity: return v;
                case ProprioMode::scaled_shifted:
                    return double(world.proprio_scale[i]) * v + double(world.proprio_shift[i]);
                case ProprioMode::smooth_monotone: return v + 0.3 * std::tanh(v);
            }
            return v;
        };
        double lo = -1.0, hi = 1.0;
        while (m(lo) > target) lo *= 2.0;
        while (m(hi) < target) hi *= 2.0;
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            (m(mid) < target ? lo : hi) = mid;
        }
        z[i] = static_cast<Real>(0.5 * (lo + hi));
    }
    return z;
}

std::vector<Real> sample_initial_state(const World& world, Rng& rng) {
    const auto& spec = world.spec;
    std::vector<Real> z(spec.d_z());
    for (std::size_t i = 0; i < spec.d_s; ++i) z[i] = static_cast<Real>(rng.uniform(-spec.state_bound, spec.state_bound));
    for (std::size_t i = spec.d_s; i < z.size(); ++i) z[i] = static_cast<Real>(rng.normal());
    return z;
}

// --- navigation ---------------------------------------------------------

NavEnv build_nav(const WorldSpec& spec, const NavSpec& nav) {
    if (spec.d_s != 2) throw ValidationError("nav world requires d_s == 2 (planar position)");
    for (const auto& w : nav.walls) {
        if (w.x0 != w.x1 && w.y0 != w.y1) throw ValidationError("nav walls must be axis-aligned");
    }
    NavEnv env;
    env.world = build_world(spec);
    env.walls = nav.walls;
    env.step_scale = nav.step_scale;
    env.goal_tolerance = nav.goal_tolerance;
    return env;
}

std::array<Real, 2> nav_move(const NavEnv& env, std::array<Real, 2> p, std::array<double, 2> delta) {
    const double b = env.bound();
    double nx = std::clamp(p[0] + delta[0], -b, b);
    double ny = std::clamp(p[1] + delta[1], -b, b);
    // A blocked crossing cancels the component normal to the wall; repeat so
    // a slide along one wall cannot pass through another.
    for (int pass = 0; pass < 4; ++pass) {
        bool blocked = false;
        for (const auto& w : env.walls) {
            if (w.vertical()) {
                const double wx = w.x0;
                const double lo = std::min(w.y0, w.y1), hi = std::max(w.y0, w.y1);
                const double s0 = p[0] - wx, s1 = nx - wx;
                if (s0 == 0.0 || s0 * s1 > 0.0) continue;
                const double t = (wx - p[0]) / (nx - p[0]);
                const double yc = p[1] + t * (ny - p[1]);
                if (yc >= lo && yc <= hi) {
                    nx = p[0];
                    blocked = true;
                }
            } else {
                const double wy = w.y0;
                const double lo = std::min(w.x0, w.x1), hi = std::max(w.x0, w.x1);
                const double s0 = p[1] - wy, s1 = ny - wy;
                if (s0 == 0.0 || s0 * s1 > 0.0) continue;
                const double t = (wy - p[1]) / (ny - p[1]);
                const double xc = p[0] + t * (nx - p[0]);
                if (xc >= lo && xc <= hi) {
                    ny = p[1];
                    blocked = true;
                }
            }
        }
        if (!blocked) break;
    }
    return {static_cast<Real>(nx), static_cast<Real>(ny)};
}

bool position_inside_wall(const NavEnv& env, std::array<Real, 2> p) {
    for (const auto& w : env.walls) {
        if (w.vertical()) {
            if (p[0] == w.x0 && p[1] >= std::min(w.y0, w.y1) && p[1] <= std::max(w.y0, w.y1)) return true;
        } else {
            if (p[1] == w.y0 && p[0] >= std::min(w.x0, w.x1) && p[0] <= std::max(w.x0, w.x1)) return true;
        }
    }
    return false;
}

std::vector<Real> step_nav(const NavEnv& env, std::span<const Real> z, std::span<const Real> a, Rng& rng) {
    const auto& spec = env.world.spec;
    check_dim(z, spec.d_z(), "nav step latent");
    check_dim(a, spec.d_a, "nav step action");
    if (!action_in_box(spec, a)) throw DomainError("nav step: action outside action box");
    std::array<double, 2> delta{env.step_scale * a[0], env.step_scale * a[1]};
    if (spec.sigma_z > 0) {
        delta[0] += spec.sigma_z * rng.normal();
        delta[1] += spec.sigma_z * rng.normal();
    }
    std::vector<Real> next(z.size());
    const auto p = nav_move(env, {z[0], z[1]}, delta);
    next[0] = p[0];
    next[1] = p[1];
    step_distractors(env.world, z.subspan(2), std::span<Real>(next).subspan(2), rng);
    return next;
}

std::array<Real, 2> sample_free_position(const NavEnv& env, Rng& rng) {
    const double b = env.bound();
    std::array<Real, 2> p{};
    do {
        p = {static_cast<Real>(rng.uniform(-b, b)), static_cast<Real>(rng.uniform(-b, b))};
    } while (position_inside_wall(env, p));
    return p;
}

std::vector<Real> render(const NavEnv& env, std::span<const Real> z) {
    const double b = env.bound();
    const double pixel = 2.0 * b / kRenderSide;
    const double agent_sigma = 0.1 * b;
    std::vector<Real> img(kRenderPixels, Real(0));
    auto segment_distance = [](double px, double py, const WallSegment& w) {
        const double cx = std::clamp(px, std::min(w.x0, w.x1), std::max(w.x0, w.x1));
        const double cy = std::clamp(py, std::min(w.y0, w.y1), std::max(w.y0, w.y1));
        return std::hypot(px - cx, py - cy);
    };
    for (std::size_t r = 0; r < kRenderSide; ++r) {
        const double py = -b + (static_cast<double>(r) + 0.5) * pixel;
        for (std::size_t c = 0; c < kRenderSide; ++c) {
            const double px = -b + (static_cast<double>(c) + 0.5) * pixel;
            double v = 0.0;
            for (const auto& w : env.walls) {
                if (segment_distance(px, py, w) <= 0.5 * pixel) v = std::max(v, 0.5);
            }
            if (std::hypot(px - env.goal[0], py - env.goal[1]) <= 0.75 * pixel) v = std::max(v, 0.25);
            const double d2 = (px - z[0]) * (px - z[0]) + (py - z[1]) * (py - z[1]);
            v = std::max(v, std::exp(-d2 / (2.0 * agent_sigma * agent_sigma)));
            img[r * kRenderSide + c] = static_cast<Real>(v);
        }
    }
    return img;
}

// --- datasets -----------------------------------------------------------

std::string to_string(Policy p) { return p == Policy::uniform_random ? "uniform-random" : "goal-seeking-scripted"; }

Policy parse_policy(const std::string& s) {
    if (s == "uniform-random") return Policy::uniform_random;
    if (s == "goal-seeking-scripted") return Policy::goal_seeking;
    throw ValidationError("unknown policy '" + s + "'");
}

TrajectoryBatch TrajectoryBatch::select_episodes(std::size_t first, std::size_t count) const {
    if (first + count > episodes()) throw DomainError("select_episodes: range exceeds episode count");
    TrajectoryBatch out;
    if (count == 0) return out;
    const std::size_t begin = episode_begin(first);
    const std::size_t end = episode_end(first + count - 1);
    out.embeddings = embeddings.slice_rows(begin, end - begin);
    out.proprio = proprio.slice_rows(begin, end - begin);
    out.actions = actions.slice_rows(begin, end - begin);
    out.latents = latents.slice_rows(begin, end - begin);
    if (has_renders()) out.renders = renders.slice_rows(begin, end - begin);
    for (std::size_t e = first; e < first + count; ++e) out.episode_starts.push_back(episode_starts[e] - begin);
    return out;
}

namespace {

struct WorldStepper {
    const World& world;
    std::vector<Real> initial(Rng& rng) const { return sample_initial_state(world, rng); }
    std::vector<Real> step(std::span<const Real> z, std::span<const Real> a, Rng& rng) const {
        return step_true(world, z, a, rng);
    }
    std::vector<Real> goal(Rng& rng) const {
        std::vector<Real> g(world.spec.d_s);
        for (auto& v : g) v = static_cast<Real>(rng.uniform(-world.spec.state_bound, world.spec.state_bound));
        return g;
    }
    // Scripted controller: push along B_s^T (goal - z^s).
    void scripted(std::span<const Real> z, std::span<const Real> g, std::span<Real> a) const {
        const auto& spec = world.spec;
        for (std::size_t j = 0; j < spec.d_a; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < spec.d_s; ++i) acc += double(world.dyn_b(i, j)) * (g[i] - z[i]);
            a[j] = static_cast<Real>(3.0 * acc);
        }
    }
    const World& base() const { return world; }
};

struct NavStepper {
    const NavEnv& env;
    std::vector<Real> initial(Rng& rng) const {
        auto z = sample_initial_state(env.world, rng);
        const auto p = sample_free_position(env, rng);
        z[0] = p[0];
        z[1] = p[1];
        return z;
    }
    std::vector<Real> step(std::span<const Real> z, std::span<const Real> a, Rng& rng) const {
        return step_nav(env, z, a, rng);
    }
    std::vector<Real> goal(Rng& rng) const {
        const auto p = sample_free_position(env, rng);
        return {p[0], p[1]};
    }
    void scripted(std::span<const Real> z, std::span<const Real> g, std::span<Real> a) const {
        for (std::size_t j = 0; j < 2; ++j) a[j] = static_cast<Real>(0.5 * (g[j] - z[j]) / env.step_scale);
    }
    const World& base() const { return env.world; }
};

template <typename Stepper>
void generate_episode(const Stepper& stepper, const NavEnv* nav, const GenerateOptions& opt, std::size_t e,
                      TrajectoryBatch& out) {
    const World& world = stepper.base();
    const auto& spec = world.spec;
    Rng rng(derive_seed(opt.seed, e));
    auto z = stepper.initial(rng);
    const auto goal = stepper.goal(rng);
    NavEnv local_env;
    if (nav && opt.renders) {
        local_env = *nav;
        if (opt.policy == Policy::goal_seeking) local_env.goal = {goal[0], goal[1]};
    }
    std::vector<Real> a(spec.d_a);
    for (std::size_t t = 0; t < opt.horizon; ++t) {
        const std::size_t row = e * opt.horizon + t;
        const auto x = emit_embedding(world, z, rng);
        const auto s = proprio_of(world, std::span<const Real>(z).first(spec.d_s));
        std::copy(x.begin(), x.end(), out.embeddings.row(row).begin());
        std::copy(s.begin(), s.end(), out.proprio.row(row).begin());
        std::copy(z.begin(), z.end(), out.latents.row(row).begin());
        if (nav && opt.renders) {
            const auto img = render(local_env, z);
            std::copy(img.begin(), img.end(), out.renders.row(row).begin());
        }
        if (opt.policy == Policy::uniform_random) {
            for (auto& v : a) v = static_cast<Real>(rng.uniform(spec.action_low, spec.action_high));
        } else {
            stepper.scripted(z, goal, a);
            for (auto& v : a) {
                v = static_cast<Real>(std::clamp(v + 0.3 * rng.normal(), spec.action_low, spec.action_high));
            }
        }
        std::copy(a.begin(), a.end(), out.actions.row(row).begin());
        z = stepper.step(z, a, rng);
    }
}

template <typename Stepper>
TrajectoryBatch generate_impl(const Stepper& stepper, const NavEnv* nav, const GenerateOptions& opt, bool threaded) {
    if (opt.n_traj < 1 || opt.horizon < 1) throw DomainError("generate_dataset: n_traj and T must be >= 1");
    const auto& spec = stepper.base().spec;
    const std::size_t n = opt.n_traj * opt.horizon;
    TrajectoryBatch out;
    out.embeddings = Tensor::matrix(n, spec.d_x);
    out.proprio = Tensor::matrix(n, spec.d_s);
    out.actions = Tensor::matrix(n, spec.d_a);
    out.latents = Tensor::matrix(n, spec.d_z());
    if (nav && opt.renders) out.renders = Tensor::matrix(n, kRenderPixels);
    for (std::size_t e = 0; e < opt.n_traj; ++e) out.episode_starts.push_back(e * opt.horizon);

    const auto count = static_cast<std::int64_t>(opt.n_traj);
    if (threaded) {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t e = 0; e < count; ++e) generate_episode(stepper, nav, opt, static_cast<std::size_t>(e), out);
    } else {
        for (std::int64_t e = 0; e < count; ++e) generate_episode(stepper, nav, opt, static_cast<std::size_t>(e), out);
    }
    return out;
}

}  // namespace

TrajectoryBatch generate_dataset(const World& world, const GenerateOptions& opt) {
    return generate_impl(WorldStepper{world}, nullptr, opt, true);
}
TrajectoryBatch generate_dataset(const NavEnv& env, const GenerateOptions& opt) {
    return generate_impl(NavStepper{env}, &env, opt, true);
}
TrajectoryBatch generate_dataset_serial(const World& world, const GenerateOptions& opt) {
    return generate_impl(WorldStepper{world}, nullptr, opt, false);
}
TrajectoryBatch generate_dataset_serial(const NavEnv& env, const GenerateOptions& opt) {
    return generate_impl(NavStepper{env}, &env, opt, false);
}

}  // namespace tcwm
