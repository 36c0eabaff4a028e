#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tcwm/datastore.hpp"
#include "tcwm/model.hpp"
#include "tcwm/world.hpp"

namespace tcwm {

// Past latents and actions preceding z0, oldest first. Each holds H rows.
struct RolloutHistory {
    Tensor latents;  // [H x d_z]
    Tensor actions;  // [H x d_a]
};

class RolloutModel {
public:
    virtual ~RolloutModel() = default;
    virtual std::size_t latent_dim() const = 0;
    virtual std::size_t action_dim() const = 0;
    // actions [n x horizon*d_a] -> predicted latents [n x horizon*d_z]
    virtual Tensor rollout_batch(std::span<const Real> z0, const Tensor& actions, std::size_t horizon,
                                 const RolloutHistory* history) const = 0;
};

/// Iterates the trained dynamics. Without a history the window is
/// bootstrapped by repeating z0 and zero-padding the past actions.
class TcwmRollout final : public RolloutModel {
public:
    explicit TcwmRollout(const TcwmModel& model) : model_(model) {}
    std::size_t latent_dim() const override { return model_.latent_dim(); }
    std::size_t action_dim() const override { return model_.config().d_a; }
    Tensor rollout_batch(std::span<const Real> z0, const Tensor& actions, std::size_t horizon,
                         const RolloutHistory* history) const override;

private:
    const TcwmModel& model_;
};

/// Markov dynamics given as a function z' = f(z, a), evaluated row-wise.
class StepFunctionRollout final : public RolloutModel {
public:
    using StepFn = std::function<void(std::span<const Real> z, std::span<const Real> a, std::span<Real> out)>;
    StepFunctionRollout(std::size_t latent_dim, std::size_t action_dim, StepFn fn)
        : latent_(latent_dim), action_(action_dim), fn_(std::move(fn)) {}
    std::size_t latent_dim() const override { return latent_; }
    std::size_t action_dim() const override { return action_; }
    Tensor rollout_batch(std::span<const Real> z0, const Tensor& actions, std::size_t horizon,
                         const RolloutHistory* history) const override;

private:
    std::size_t latent_;
    std::size_t action_;
    StepFn fn_;
};

// Single sequence: actions [H_p x d_a] -> latents [H_p x d_z].
Tensor rollout(const TcwmModel& model, std::span<const Real> z0, const Tensor& actions,
               const RolloutHistory* history = nullptr);

// Squared Euclidean distance.
double plan_cost(std::span<const Real> z, std::span<const Real> goal);

struct CemConfig {
    std::size_t population = 256;  // N
    std::size_t elites = 32;       // K
    std::size_t iterations = 10;   // T_cem
    std::size_t horizon = 5;       // H_p
    std::size_t execute = 1;       // H_a
    double action_low = -1.0;
    double action_high = 1.0;
    double std_floor = 1e-6;
    double reinflate_std = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PlanResult {
    Tensor actions;  // [H_p x d_a], best sequence ever seen
    double best_cost = 0.0;
    std::vector<double> elite_mean_costs;  // one per iteration
    std::size_t executed = 0;              // H_a
    std::size_t discarded = 0;             // candidates with non-finite cost
};

PlanResult plan_cem(const RolloutModel& model, std::span<const Real> z0, std::span<const Real> goal,
                    const CemConfig& cfg, const RolloutHistory* history = nullptr);

// --- closed loop on NavEnv ---------------------------------------------

/// Turns true world states into model latents the way a deployed agent
/// would: emit an embedding, read proprioception, standardise, encode.
class NavObserver {
public:
    NavObserver(const NavEnv& env, const TcwmModel& model, const StandardizationStats& stats)
        : env_(env), model_(model), stats_(stats) {}
    std::vector<Real> encode(std::span<const Real> z_true, Rng& rng) const;
    // Goal observation: the start state with the agent moved to the goal.
    std::vector<Real> encode_goal(std::span<const Real> z_start, std::array<Real, 2> goal, Rng& rng) const;
    const TcwmModel& model() const noexcept { return model_; }

private:
    const NavEnv& env_;
    const TcwmModel& model_;
    const StandardizationStats& stats_;
};

struct ControlStep {
    std::vector<Real> action;
    double cost = 0.0;  // planner's own cost, NaN when it has none
};

/// Called once per environment step with the current true state; anything a
/// controller knows about the world it must get through its observer.
class NavController {
public:
    virtual ~NavController() = default;
    virtual void reset(std::span<const Real> z_start, std::array<Real, 2> goal, Rng& rng) = 0;
    virtual ControlStep act(std::span<const Real> z_true, Rng& rng) = 0;
};

class RandomController final : public NavController {
public:
    explicit RandomController(const WorldSpec& spec) : spec_(spec) {}
    void reset(std::span<const Real>, std::array<Real, 2>, Rng&) override {}
    ControlStep act(std::span<const Real> z_true, Rng& rng) override;

private:
    WorldSpec spec_;
};

/// Receding-horizon CEM over the model's latent rollouts: plans H_p steps,
/// executes the first H_a, then replans. The dynamics window is filled with
/// the real recent latents and actions once they exist.
class CemController final : public NavController {
public:
    CemController(const NavObserver& observer, CemConfig cfg) : observer_(observer), cfg_(cfg) {}
    void reset(std::span<const Real> z_start, std::array<Real, 2> goal, Rng& rng) override;
    ControlStep act(std::span<const Real> z_true, Rng& rng) override;

private:
    const NavObserver& observer_;
    CemConfig cfg_;
    std::vector<Real> goal_latent_;
    std::vector<std::vector<Real>> past_latents_;
    std::vector<std::vector<Real>> past_actions_;
    std::vector<std::vector<Real>> queue_;
    double last_cost_ = 0.0;
};

// Window history of length h from past (latent, action) pairs, oldest first.
// Missing entries repeat the oldest known latent (or `current`) with zero action.
RolloutHistory window_history(const std::vector<std::vector<Real>>& latents,
                              const std::vector<std::vector<Real>>& actions, std::span<const Real> current,
                              std::size_t h, std::size_t action_dim);

struct EpisodeRecord {
    std::size_t step = 0;
    std::array<Real, 2> position{0, 0};
    double planned_cost = 0.0;
    bool success = false;
};

struct EpisodeOutcome {
    bool success = false;
    std::size_t steps = 0;
    std::vector<EpisodeRecord> log;  // row 0 is the start state
};

// Start with true state z_start; success once the agent is within the goal
// tolerance. Replans after each executed prefix.
EpisodeOutcome run_episode(const NavEnv& env, NavController& controller, std::span<const Real> z_start,
                           std::array<Real, 2> goal, std::size_t max_steps, std::uint64_t seed);

struct NavTask {
    std::vector<Real> start;
    std::array<Real, 2> goal{0, 0};
};
// Free start and goal positions at least min_distance apart.
NavTask sample_task(const NavEnv& env, std::uint64_t seed, std::size_t episode, double min_distance = 0.5);

using ControllerFactory = std::function<std::unique_ptr<NavController>()>;
// Episodes run in parallel, each with its own controller and seed stream.
std::vector<EpisodeOutcome> evaluate_controller(const NavEnv& env, const ControllerFactory& factory,
                                                std::size_t episodes, std::size_t max_steps, std::uint64_t seed);
double success_rate(const std::vector<EpisodeOutcome>& outcomes);

void write_episode_csv(const std::vector<EpisodeOutcome>& outcomes, const std::filesystem::path& file);

}  // namespace tcwm
