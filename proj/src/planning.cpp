#include "tcwm/planning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

#include "tcwm/errors.hpp"

namespace tcwm {

Tensor TcwmRollout::rollout_batch(std::span<const Real> z0, const Tensor& actions, std::size_t horizon,
                                  const RolloutHistory* history) const {
    const ModelConfig& cfg = model_.config();
    const std::size_t dz = model_.latent_dim(), da = cfg.d_a, h = cfg.history, stride = dz + da;
    if (z0.size() != dz) throw DimensionError("rollout: z0 has " + std::to_string(z0.size()) + " dims, model " + std::to_string(dz));
    if (actions.cols() != horizon * da) {
        throw DimensionError("rollout: actions " + shape_string(actions.shape()) + " do not hold " +
                             std::to_string(horizon) + " steps of " + std::to_string(da));
    }
    const std::size_t n = horizon == 0 ? 0 : actions.rows();
    Tensor out({n, horizon * dz});
    if (horizon == 0) return out;
    if (history && (history->latents.rows() != h || history->actions.rows() != h || history->latents.cols() != dz ||
                    history->actions.cols() != da)) {
        throw DimensionError("rollout: history must hold " + std::to_string(h) + " latents and actions");
    }

    Tensor windows = Tensor::matrix(n, (h + 1) * stride);
    for (std::size_t i = 0; i < n; ++i) {
        Real* w = windows.row(i).data();
        for (std::size_t k = 0; k < h; ++k) {
            if (history) {
                std::copy_n(history->latents.row(k).data(), dz, w + k * stride);
                std::copy_n(history->actions.row(k).data(), da, w + k * stride + dz);
            } else {
                std::copy_n(z0.data(), dz, w + k * stride);
            }
        }
        std::copy_n(z0.data(), dz, w + h * stride);
        std::copy_n(actions.row(i).data(), da, w + h * stride + dz);
    }
    for (std::size_t t = 0; t < horizon; ++t) {
        const Tensor next = model_.predict_next_packed(windows);
        for (std::size_t i = 0; i < n; ++i) std::copy_n(next.row(i).data(), dz, out.row(i).data() + t * dz);
        if (t + 1 == horizon) break;
        for (std::size_t i = 0; i < n; ++i) {
            Real* w = windows.row(i).data();
            std::copy(w + stride, w + (h + 1) * stride, w);
            std::copy_n(next.row(i).data(), dz, w + h * stride);
            std::copy_n(actions.row(i).data() + (t + 1) * da, da, w + h * stride + dz);
        }
    }
    return out;
}

Tensor StepFunctionRollout::rollout_batch(std::span<const Real> z0, const Tensor& actions, std::size_t horizon,
                                          const RolloutHistory*) const {
    if (z0.size() != latent_) throw DimensionError("rollout: z0 dimension mismatch");
    if (actions.cols() != horizon * action_) throw DimensionError("rollout: action dimension mismatch");
    const std::size_t n = horizon == 0 ? 0 : actions.rows();
    Tensor out({n, horizon * latent_});
    std::vector<Real> z(latent_), next(latent_);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(z0.begin(), z0.end(), z.begin());
        for (std::size_t t = 0; t < horizon; ++t) {
            fn_(z, actions.row(i).subspan(t * action_, action_), next);
            std::copy(next.begin(), next.end(), out.row(i).data() + t * latent_);
            std::swap(z, next);
        }
    }
    return out;
}

Tensor rollout(const TcwmModel& model, std::span<const Real> z0, const Tensor& actions, const RolloutHistory* history) {
    const std::size_t da = model.config().d_a, dz = model.latent_dim();
    if (actions.size() == 0) return Tensor({0, dz});
    if (actions.cols() != da) throw DimensionError("rollout: actions must be [H_p x " + std::to_string(da) + "]");
    const std::size_t horizon = actions.rows();
    const Tensor flat = actions.reshaped({1, horizon * da});
    return TcwmRollout(model).rollout_batch(z0, flat, horizon, history).reshaped({horizon, dz});
}

double plan_cost(std::span<const Real> z, std::span<const Real> goal) {
    if (z.size() != goal.size()) throw DimensionError("cost: latent and goal dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double d = double(z[i]) - double(goal[i]);
        s += d * d;
    }
    return s;
}

void CemConfig::validate() const {
    if (elites < 1 || elites > population) throw ValidationError("cem: need 1 <= elites <= population");
    if (execute < 1 || execute > horizon) throw ValidationError("cem: need 1 <= execute <= horizon");
    if (iterations < 1) throw ValidationError("cem: iterations must be >= 1");
    if (!(action_high > action_low)) throw ValidationError("cem: empty action box");
    if (!(std_floor > 0.0)) throw ValidationError("cem: std floor must be > 0");
}

PlanResult plan_cem(const RolloutModel& model, std::span<const Real> z0, std::span<const Real> goal,
                    const CemConfig& cfg, const RolloutHistory* history) {
    cfg.validate();
    const std::size_t dz = model.latent_dim(), da = model.action_dim();
    if (goal.size() != dz) throw DimensionError("plan_cem: goal has the wrong dimension");
    const std::size_t dims = cfg.horizon * da, n = cfg.population;
    const double lo = cfg.action_low, hi = cfg.action_high;

    std::vector<double> mu(dims, std::clamp(0.0, lo, hi));
    std::vector<double> sigma(dims, 0.5 * (hi - lo));
    std::vector<std::vector<Real>> carried;  // previous elites, best first

    PlanResult result;
    result.executed = cfg.execute;
    result.best_cost = std::numeric_limits<double>::infinity();
    std::vector<Real> best(dims, 0);

    Tensor cand = Tensor::matrix(n, dims);
    std::vector<double> costs(n);
    std::vector<std::size_t> order(n);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        std::size_t fixed = 0;
        if (it == 0) {
            for (std::size_t j = 0; j < dims; ++j) cand(0, j) = Real(mu[j]);
            fixed = 1;
        } else {
            for (const auto& e : carried) std::copy(e.begin(), e.end(), cand.row(fixed++).data());
        }
        for (std::size_t i = fixed; i < n; ++i) {
            Rng rng(derive_seed(cfg.seed, it, i));
            for (std::size_t j = 0; j < dims; ++j) cand(i, j) = Real(std::clamp(mu[j] + sigma[j] * rng.normal(), lo, hi));
        }

        const Tensor latents = model.rollout_batch(z0, cand, cfg.horizon, history);
        std::size_t finite = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto last = latents.row(i).subspan((cfg.horizon - 1) * dz, dz);
            costs[i] = plan_cost(last, goal);
            if (std::isfinite(costs[i])) {
                order[finite++] = i;
            } else {
                ++result.discarded;
            }
        }
        if (finite == 0) throw PlannerError("plan_cem: every candidate produced a non-finite cost");
        std::stable_sort(order.begin(), order.begin() + std::ptrdiff_t(finite),
                         [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
        const std::size_t k = std::min(cfg.elites, finite);

        double mean_cost = 0.0;
        for (std::size_t e = 0; e < k; ++e) mean_cost += costs[order[e]];
        result.elite_mean_costs.push_back(mean_cost / double(k));
        if (costs[order[0]] < result.best_cost) {
            result.best_cost = costs[order[0]];
            std::copy_n(cand.row(order[0]).data(), dims, best.begin());
        }

        carried.assign(k, std::vector<Real>(dims));
        for (std::size_t e = 0; e < k; ++e) std::copy_n(cand.row(order[e]).data(), dims, carried[e].begin());
        bool all_floor = true;
        for (std::size_t j = 0; j < dims; ++j) {
            double m = 0.0;
            for (std::size_t e = 0; e < k; ++e) m += carried[e][j];
            m /= double(k);
            double v = 0.0;
            for (std::size_t e = 0; e < k; ++e) v += (carried[e][j] - m) * (carried[e][j] - m);
            mu[j] = m;
            sigma[j] = std::max(std::sqrt(v / double(k)), cfg.std_floor);
            if (sigma[j] > cfg.std_floor) all_floor = false;
        }
        if (all_floor && 2 * (it + 1) < cfg.iterations) std::fill(sigma.begin(), sigma.end(), cfg.reinflate_std);
    }
    result.actions = Tensor({cfg.horizon, da}, best);
    return result;
}

// --- closed loop --------------------------------------------------------

std::vector<Real> NavObserver::encode(std::span<const Real> z_true, Rng& rng) const {
    const World& w = env_.world;
    const auto x = emit_embedding(w, z_true, rng);
    const auto s = proprio_of(w, z_true.first(w.spec.d_s));
    Tensor xt({1, x.size()}, x);
    Tensor st({1, s.size()}, s);
    stats_.standardize_inplace(st.row(0));
    const Tensor z = model_.encode(model_.embed_joint(xt, st));
    return {z.values().begin(), z.values().end()};
}

std::vector<Real> NavObserver::encode_goal(std::span<const Real> z_start, std::array<Real, 2> goal, Rng& rng) const {
    std::vector<Real> z(z_start.begin(), z_start.end());
    z[0] = goal[0];
    z[1] = goal[1];
    return encode(z, rng);
}

ControlStep RandomController::act(std::span<const Real>, Rng& rng) {
    ControlStep step;
    step.action.resize(spec_.d_a);
    for (auto& a : step.action) a = Real(rng.uniform(spec_.action_low, spec_.action_high));
    step.cost = std::numeric_limits<double>::quiet_NaN();
    return step;
}

RolloutHistory window_history(const std::vector<std::vector<Real>>& latents,
                              const std::vector<std::vector<Real>>& actions, std::span<const Real> current,
                              std::size_t h, std::size_t action_dim) {
    RolloutHistory hist;
    const std::size_t dz = current.size();
    hist.latents = Tensor::matrix(h, dz);
    hist.actions = Tensor::matrix(h, action_dim);
    const std::size_t have = std::min(h, latents.size());
    const std::size_t pad = h - have;
    const std::size_t first = latents.size() - have;
    for (std::size_t k = 0; k < h; ++k) {
        if (k < pad) {
            const auto& fill = latents.empty() ? std::vector<Real>(current.begin(), current.end()) : latents[first];
            std::copy_n(fill.data(), dz, hist.latents.row(k).data());
        } else {
            std::copy_n(latents[first + k - pad].data(), dz, hist.latents.row(k).data());
            std::copy_n(actions[first + k - pad].data(), action_dim, hist.actions.row(k).data());
        }
    }
    return hist;
}

void CemController::reset(std::span<const Real> z_start, std::array<Real, 2> goal, Rng& rng) {
    goal_latent_ = observer_.encode_goal(z_start, goal, rng);
    past_latents_.clear();
    past_actions_.clear();
    queue_.clear();
    last_cost_ = 0.0;
}

ControlStep CemController::act(std::span<const Real> z_true, Rng& rng) {
    const auto z = observer_.encode(z_true, rng);
    const TcwmModel& model = observer_.model();
    const std::size_t h = model.config().history, da = model.config().d_a;
    if (queue_.empty()) {
        const auto hist = window_history(past_latents_, past_actions_, z, h, da);
        CemConfig cfg = cfg_;
        cfg.seed = rng.next();
        const auto plan = plan_cem(TcwmRollout(model), z, goal_latent_, cfg, &hist);
        for (std::size_t k = 0; k < cfg.execute; ++k) {
            queue_.emplace_back(plan.actions.row(k).begin(), plan.actions.row(k).end());
        }
        last_cost_ = plan.best_cost;
    }
    ControlStep step;
    step.action = queue_.front();
    queue_.erase(queue_.begin());
    step.cost = last_cost_;
    past_latents_.push_back(z);
    past_actions_.push_back(step.action);
    if (past_latents_.size() > h) {
        past_latents_.erase(past_latents_.begin());
        past_actions_.erase(past_actions_.begin());
    }
    return step;
}

namespace {

bool reached(const NavEnv& env, std::span<const Real> z, std::array<Real, 2> goal) {
    const double dx = double(z[0]) - goal[0], dy = double(z[1]) - goal[1];
    return std::sqrt(dx * dx + dy * dy) <= env.goal_tolerance;
}

}  // namespace

EpisodeOutcome run_episode(const NavEnv& env, NavController& controller, std::span<const Real> z_start,
                           std::array<Real, 2> goal, std::size_t max_steps, std::uint64_t seed) {
    Rng env_rng(derive_seed(seed, 1));
    Rng ctl_rng(derive_seed(seed, 2));
    EpisodeOutcome out;
    std::vector<Real> z(z_start.begin(), z_start.end());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.success = reached(env, z, goal);
    out.log.push_back({0, {z[0], z[1]}, nan, out.success});
    if (out.success) return out;
    controller.reset(z, goal, ctl_rng);
    for (std::size_t step = 1; step <= max_steps; ++step) {
        const ControlStep cs = controller.act(z, ctl_rng);
        z = step_nav(env, z, cs.action, env_rng);
        out.steps = step;
        out.success = reached(env, z, goal);
        out.log.push_back({step, {z[0], z[1]}, cs.cost, out.success});
        if (out.success) break;
    }
    return out;
}

NavTask sample_task(const NavEnv& env, std::uint64_t seed, std::size_t episode, double min_distance) {
    Rng rng(derive_seed(seed, 0x7461736b, episode));
    NavTask task;
    task.start = sample_initial_state(env.world, rng);
    const auto p = sample_free_position(env, rng);
    task.start[0] = p[0];
    task.start[1] = p[1];
    for (int attempt = 0;; ++attempt) {
        task.goal = sample_free_position(env, rng);
        const double dx = double(task.goal[0]) - p[0], dy = double(task.goal[1]) - p[1];
        if (std::sqrt(dx * dx + dy * dy) >= min_distance || attempt > 1000) break;
    }
    return task;
}

std::vector<EpisodeOutcome> evaluate_controller(const NavEnv& env, const ControllerFactory& factory,
                                                std::size_t episodes, std::size_t max_steps, std::uint64_t seed) {
    std::vector<EpisodeOutcome> outcomes(episodes);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t e = 0; e < std::ptrdiff_t(episodes); ++e) {
        try {
            auto controller = factory();
            const auto task = sample_task(env, seed, std::size_t(e));
            outcomes[e] = run_episode(env, *controller, task.start, task.goal, max_steps,
                                      derive_seed(seed, 0x6570, std::size_t(e)));
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return outcomes;
}

double success_rate(const std::vector<EpisodeOutcome>& outcomes) {
    if (outcomes.empty()) return 0.0;
    const auto wins = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.success; });
    return double(wins) / double(outcomes.size());
}

void write_episode_csv(const std::vector<EpisodeOutcome>& outcomes, const std::filesystem::path& file) {
    std::ostringstream os;
    os << "episode,step,x,y,planned_cost,success\n";
    char buf[160];
    for (std::size_t e = 0; e < outcomes.size(); ++e) {
        for (const auto& r : outcomes[e].log) {
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g,%.9g,%d\n", e, r.step, double(r.position[0]),
                          double(r.position[1]), r.planned_cost, r.success ? 1 : 0);
            os << buf;
        }
    }
    write_text_atomic(file, os.str());
}

}  // namespace tcwm
