#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tcwm/datastore.hpp"
#include "tcwm/nn.hpp"
#include "tcwm/planning.hpp"

namespace tcwm {

struct DiffusionConfig {
    std::size_t steps = 100;   // T_d
    double beta_start = 1e-4;
    double beta_end = 0.02;
    std::size_t horizon = 8;   // H, latents per planned trajectory
    std::size_t execute = 1;   // H_a
    std::size_t hidden = 128;
    std::size_t depth = 2;
    std::size_t epochs = 200;
    std::size_t batch = 128;
    double lr = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Linear beta schedule; index t = 0 .. T-1 is diffusion step t + 1.
struct NoiseSchedule {
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    NoiseSchedule() = default;
    NoiseSchedule(std::size_t steps, double beta_start, double beta_end);
    std::size_t steps() const noexcept { return betas.size(); }
};

// eps(x_t [n x d], t) -> predicted noise [n x d]
using NoisePredictor = std::function<Tensor(const Tensor& x_t, std::size_t t)>;

/// Ancestral DDPM sampling from x_T ~ N(0, I). Each step forms the x0
/// estimate, optionally clips it to [clip_lo, clip_hi] per dimension, and
/// draws from the Gaussian posterior q(x_{t-1} | x_t, x0).
Tensor ddpm_sample(const NoiseSchedule& schedule, std::size_t n, std::size_t dim, const NoisePredictor& eps, Rng& rng,
                   std::span<const double> clip_lo = {}, std::span<const double> clip_hi = {});

/// Conditional epsilon-prediction DDPM with an MLP denoiser over
/// [x_t, cond, time features]. Data and conditions are z-scored with
/// statistics of the training set, so the terminal distribution is close to
/// N(0, I) even for short schedules.
class ConditionalDdpm {
public:
    ConditionalDdpm() = default;
    ConditionalDdpm(std::size_t data_dim, std::size_t cond_dim, const DiffusionConfig& cfg, std::uint64_t seed);

    std::size_t data_dim() const noexcept { return data_dim_; }
    std::size_t cond_dim() const noexcept { return cond_dim_; }
    const NoiseSchedule& schedule() const noexcept { return schedule_; }

    // Returns the mean training loss of the last epoch. cond may have 0 columns.
    double fit(const Tensor& data, const Tensor& cond, const DiffusionConfig& cfg);
    // One sample per condition row; `n` samples when unconditional.
    Tensor sample(const Tensor& cond, std::size_t n, Rng& rng) const;
    // Samples are clipped to this box (data units) at every x0 estimate.
    void set_clip(std::vector<double> lo, std::vector<double> hi);

    // Noise prediction in normalised units.
    Tensor predict_noise(const Tensor& x_t, const Tensor& cond_norm, std::size_t t) const;

private:
    Tensor net_input(const Tensor& x_t, const Tensor& cond_norm, std::span<const std::size_t> t) const;

    std::size_t data_dim_ = 0;
    std::size_t cond_dim_ = 0;
    NoiseSchedule schedule_;
    MlpNet net_;
    StandardizationStats data_stats_;
    StandardizationStats cond_stats_;
    std::vector<double> clip_lo_;
    std::vector<double> clip_hi_;
};

inline constexpr std::size_t kTimeFeatures = 9;
// [t/T, sin(pi k t/T), cos(pi k t/T) for k = 1, 2, 4, 8]
void time_features(std::size_t t, std::size_t steps, std::span<Real> out);

/// Trajectory denoiser over H future latents conditioned on the current and
/// goal latents, plus an inverse dynamics model decoding each consecutive
/// latent pair into an action.
struct LdpPlanner {
    ConditionalDdpm denoiser;  // data H*d_z, cond [z_k, z_goal]
    ConditionalDdpm idm;       // data d_a, cond [z_k, z_{k+1}]
    std::size_t horizon = 0;
    std::size_t execute = 1;
    std::size_t latent_dim = 0;
    std::size_t action_dim = 0;
};

struct LdpTrainReport {
    double denoiser_loss = 0.0;
    double idm_loss = 0.0;
};

// Latents [N x d_z] and actions [N x d_a] of an encoded dataset. Each
// trajectory's goal is the last latent of its episode.
LdpPlanner train_ldp(const Tensor& latents, const Tensor& actions, const std::vector<std::size_t>& episode_starts,
                     const DiffusionConfig& cfg, double action_low, double action_high,
                     LdpTrainReport* report = nullptr);

struct LdpPlan {
    Tensor latents;  // [H x d_z]
    Tensor actions;  // [H x d_a]
    std::size_t execute = 1;
};

LdpPlan plan_ldp(const LdpPlanner& planner, std::span<const Real> z_t, std::span<const Real> z_goal, Rng& rng);

class LdpController final : public NavController {
public:
    LdpController(const NavObserver& observer, const LdpPlanner& planner) : observer_(observer), planner_(planner) {}
    void reset(std::span<const Real> z_start, std::array<Real, 2> goal, Rng& rng) override;
    ControlStep act(std::span<const Real> z_true, Rng& rng) override;

private:
    const NavObserver& observer_;
    const LdpPlanner& planner_;
    std::vector<Real> goal_latent_;
    std::vector<std::vector<Real>> queue_;
};

}  // namespace tcwm
