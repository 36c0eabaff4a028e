#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tcwm/datastore.hpp"
#include "tcwm/model.hpp"
#include "tcwm/world.hpp"

namespace tcwm {

Eigen::MatrixXd to_eigen(const Tensor& t);
Tensor from_eigen(const Eigen::MatrixXd& m);

enum class LatentBlock { task, complement, full, raw_embedding };
std::string to_string(LatentBlock b);

struct ProbeResult {
    double r2_mean = 0.0;
    double r2_std = 0.0;
    std::vector<double> r2_per_dim;  // averaged across folds
    LatentBlock block = LatentBlock::full;
};

// Ridge probe with intercept, K contiguous folds, R^2 on each held-out fold
// (uniform average over target dims). Target dims with zero held-out
// variance are skipped.
ProbeResult linear_probe(const Tensor& latents, const Tensor& targets, std::size_t folds = 5, double alpha = 1.0,
                         LatentBlock block = LatentBlock::full);

// Ridge fit on (train_x, train_y), R^2 on (test_x, test_y).
double probe_transfer_r2(const Tensor& train_x, const Tensor& train_y, const Tensor& test_x, const Tensor& test_y,
                         double alpha = 1.0);

struct A1Report {
    double p5 = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
    std::size_t pairs = 0;
    bool pass = false;  // p5 >= 0.01 * median and p95 / p5 <= 100
};

using LatentDecoder = std::function<Tensor(const Tensor&)>;

// Forward sensitivity |dec(z + d) - dec(z)| / |d| for random directions d of
// norm delta at randomly chosen latents.
A1Report check_a1(const LatentDecoder& decode, const Tensor& latents, std::size_t n_pairs = 4096, double delta = 1e-3,
                  std::uint64_t seed = 0);
A1Report check_a1(const TcwmModel& model, const Tensor& latents, std::size_t n_pairs = 4096, double delta = 1e-3,
                  std::uint64_t seed = 0);

struct A2Report {
    double spearman = 0.0;
    double pearson = 0.0;
    bool defined = true;                // false when either distance list is constant
    std::size_t near_zero_embedding = 0;  // pairs with |dx| ~ 0 but |dz| clearly nonzero
    std::size_t pairs = 0;
};

A2Report check_a2(const Tensor& latents, const Tensor& embeddings, std::size_t n_pairs = 2048, std::uint64_t seed = 0);

struct A4Report {
    ProbeResult task;        // z^s -> s^p
    ProbeResult complement;  // z^c -> s^p
    double efficiency_task = 0.0;        // R^2 / d_s
    double efficiency_complement = 0.0;  // R^2 / (d_z - d_s)
    double efficiency_ratio = 0.0;
};

A4Report check_a4(const Tensor& latents, std::size_t d_s, const Tensor& proprio, std::size_t folds = 5,
                  double alpha = 1.0);

struct AssumptionReport {
    A1Report a1;
    A2Report a2;
    A4Report a4;
};

struct AffineFit {
    Eigen::MatrixXd a;  // [d_true x d_est]
    Eigen::VectorXd b;  // [d_true]
    double r2 = 0.0;
    bool ridge_fallback = false;
};

// Least squares z_true ~ A z_est + b, in-sample R^2 averaged over true dims.
AffineFit affine_recovery(const Tensor& z_est, const Tensor& z_true);

// exp(entropy) of the normalised eigenvalues of the sample covariance.
double effective_rank(const Tensor& latents);
std::vector<double> latent_variances(const Tensor& latents);

// Open-loop rollouts from every valid start in episodes [first, first+count):
// the first H+1 steps come from the encoded data, the next `horizon` from the
// model. Per-step MSE divided by the mean per-dim variance of the latents.
std::vector<double> rollout_mse(const TcwmModel& model, const TrajectoryBatch& data, const StandardizationStats& stats,
                                std::size_t horizon, std::size_t first_episode, std::size_t episode_count);

// Mean SSIM over all 8x8 windows (stride 1), C1 = 0.01^2, C2 = 0.03^2.
double ssim(std::span<const Real> a, std::span<const Real> b, std::size_t width);

enum class PerturbKind { gauss_noise, channel_jitter };
std::string to_string(PerturbKind k);
PerturbKind parse_perturb_kind(const std::string& s);

struct PerturbOptions {
    PerturbKind kind = PerturbKind::gauss_noise;
    double sigma = 0.1;        // gauss-noise
    double scale_low = 0.8;    // channel-jitter
    double scale_high = 1.2;
    double shift_std = 0.05;
    std::uint64_t seed = 0;
};

// Perturbs embeddings and renders; renders are clamped to [0, 1].
// Jitter draws one scale and shift per sample and channel (embedding dim);
// renders are single-channel.
TrajectoryBatch perturb(const TrajectoryBatch& data, const PerturbOptions& opt);

}  // namespace tcwm
