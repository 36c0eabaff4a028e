#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tcwm/datastore.hpp"
#include "tcwm/model.hpp"
#include "tcwm/world.hpp"

namespace tcwm {

enum class TrainMode { tcwm, no_align, no_rec, direct_embedding };
std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct LossWeights {
    double dyn_z = 1.0;
    double dyn_s = 1.0;
    double align = 1.0;
    double rec = 1.0;
    double l1 = 1e-3;
    double tau = 0.3;
    void validate() const;
};

// Which terms a mode keeps. no-align drops L_align and L^s_dyn, no-rec drops
// L_rec, direct-embedding keeps only L^z_dyn on the joint embedding.
struct ActiveTerms {
    bool dyn_z = true;
    bool dyn_s = true;
    bool align = true;
    bool rec = true;
    bool l1 = true;
};
ActiveTerms active_terms(TrainMode mode, const LossWeights& w);

struct LossOptions {
    LossWeights weights;
    TrainMode mode = TrainMode::tcwm;
    bool stop_grad_target = true;          // block gradient through encode(x_{t+1})
    bool detach_rec_target = true;         // block gradient through the joint-embedding target of L_rec
    bool infonce_include_positive = true;  // positive pair inside the InfoNCE denominator
};

struct LossBreakdown {
    double dyn_z = 0.0;
    double dyn_s = 0.0;
    double align = 0.0;
    double rec = 0.0;
    double l1 = 0.0;
    double total = 0.0;

    LossBreakdown& operator+=(const LossBreakdown& o);
    LossBreakdown scaled(double s) const;
    bool finite() const;
};

// Mean of squared differences. If grad is non-null it receives dL/dpred.
double loss_mse(const Tensor& pred, const Tensor& target, Tensor* grad = nullptr);

// InfoNCE over rows of u (anchors) against rows of v, cosine similarity / tau.
double info_nce(const Tensor& u, const Tensor& v, double tau, bool include_positive, Tensor* grad_u = nullptr,
                Tensor* grad_v = nullptr);
// InfoNCE of g_phi(z) against h_psi(s).
double loss_align(const TcwmModel& model, const Tensor& z, const Tensor& s_std, double tau,
                  bool include_positive = true);
// Sum of |w| over the g_phi weight matrix.
double l1_penalty(const TcwmModel& model);

/// B windows of H+2 consecutive steps, stored step-major: row k*B + b holds
/// step k of window b. Actions cover steps 0..H.
struct WindowBatch {
    std::size_t size = 0;
    std::size_t history = 0;
    Tensor x_vis;    // [(H+2)B x d_x]
    Tensor s_std;    // [(H+2)B x d_p], standardised
    Tensor actions;  // [(H+1)B x d_a]
    Tensor renders;  // [B x pixels] at the anchor step, may be empty

    std::size_t steps() const noexcept { return history + 2; }
};

// Anchors t (the last step of the input window) with t-H >= episode start and
// t+1 inside the episode, over episodes [first, first + count).
std::vector<std::size_t> window_anchors(const TrajectoryBatch& data, std::size_t history, std::size_t first_episode,
                                        std::size_t episode_count);
WindowBatch gather_windows(const TrajectoryBatch& data, const StandardizationStats& stats,
                           std::span<const std::size_t> anchors, std::size_t history);

// Targets that receive no gradient. Computing them once and passing them in
// turns total_loss into an ordinary function of the parameters, which is what
// the finite-difference check differentiates.
struct DetachedTargets {
    Tensor z_next;       // encode(x_{t+1})
    Tensor joint_anchor; // joint embedding at the anchor step
};
DetachedTargets detached_targets(const TcwmModel& model, const WindowBatch& batch);

/// Forward pass of the full objective. With accumulate_grads the analytic
/// gradient is added into the model's grad buffers.
LossBreakdown total_loss(TcwmModel& model, const WindowBatch& batch, const LossOptions& opt, bool accumulate_grads,
                         const DetachedTargets* frozen = nullptr);

// Parameters that the given mode optimises.
std::vector<ParamRef> trainable_params(TcwmModel& model, TrainMode mode);

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch = 64;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    double eval_fraction = 0.1;
    LossOptions loss;

    void validate() const;
};

struct EpochLog {
    LossBreakdown train;
    LossBreakdown eval;
    double visual = 0.0;  // f_vis MSE, 0 when disabled
};

struct TrainReport {
    std::vector<EpochLog> epochs;
    LossBreakdown initial_eval;
    LossBreakdown final_eval;

    void write_csv(const std::filesystem::path& file) const;
};

struct TrainResult {
    TrainReport report;
    StandardizationStats stats;
    std::size_t train_episodes = 0;  // episodes [0, train_episodes) trained on; the rest held out
};

// Episodes held out for evaluation: the last round(fraction * E), at least one
// when fraction > 0 and E >= 2.
std::size_t eval_episode_count(std::size_t episodes, double fraction);

TrainResult train(TcwmModel& model, const TrajectoryBatch& data, const TrainConfig& config);
// Same loop, with the statistics supplied instead of computed.
TrainReport train_with_stats(TcwmModel& model, const TrajectoryBatch& data, const TrainConfig& config,
                             const StandardizationStats& stats);

// Latents of every step, [N x latent_dim].
Tensor encode_dataset(const TcwmModel& model, const TrajectoryBatch& data, const StandardizationStats& stats);

}  // namespace tcwm
