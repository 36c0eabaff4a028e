#pragma once

// Evaluation pipelines shared by the CLI and the acceptance runs. Every
// function is deterministic in its inputs and seed.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcwm/config.hpp"
#include "tcwm/evaluation.hpp"
#include "tcwm/planning.hpp"
#include "tcwm/training.hpp"

namespace tcwm {

struct TrainedModel {
    TcwmModel model;
    TrainResult result;
};

// Model initialised from the config's model seed stream, then trained.
TrainedModel train_experiment(const ExperimentConfig& cfg, const TrajectoryBatch& data);

struct EncodedDataset {
    Tensor proprio_std;  // standardised s^p
    Tensor joint;        // encoder input [x_vis, f_emb(s^p)]
    Tensor latents;
};

EncodedDataset encode_with(const TcwmModel& model, const StandardizationStats& stats, const TrajectoryBatch& data);

// Columns [first, first + count) of a tensor.
Tensor column_block(const Tensor& t, std::size_t first, std::size_t count);

struct ProbeSummary {
    TrainMode mode = TrainMode::tcwm;
    ProbeResult proprio_task;        // z^s -> s^p
    ProbeResult proprio_complement;  // z^c -> s^p
    ProbeResult proprio_full;        // z -> s^p
    ProbeResult distractor_full;     // z -> true z^c
    double affine_r2 = 0.0;          // z^s_true ~ A z^s + b
    double effective_rank = 0.0;
    std::vector<double> variances;
    std::vector<double> rollout;     // normalised MSE per step ahead
    double visual_ssim = -1.0;       // mean SSIM of decoded renders, -1 without a visual decoder
};

// world_d_s: width of the true task block in data.latents.
ProbeSummary summarize_probe(const TcwmModel& model, TrainMode mode, const StandardizationStats& stats,
                             const TrajectoryBatch& data, std::size_t world_d_s, const EvalSection& eval);
nlohmann::json to_json(const ProbeSummary& s);

// A2 is measured against the encoder input (the joint embedding).
AssumptionReport verify_assumptions(const TcwmModel& model, const StandardizationStats& stats,
                                    const TrajectoryBatch& data, const EvalSection& eval, std::uint64_t seed);
nlohmann::json to_json(const AssumptionReport& r);

struct RobustnessResult {
    PerturbKind kind = PerturbKind::gauss_noise;
    double clean_r2 = 0.0;
    double perturbed_r2 = 0.0;
    double relative_drop = 0.0;  // (clean - perturbed) / |clean|
};

// Ridge probe latents -> true z^c fit on clean latents of the leading
// episodes, then scored on the held-out episodes clean and perturbed.
// Proprioception stays clean; only embeddings and renders are perturbed.
std::vector<RobustnessResult> robustness_probe(const TcwmModel& model, const StandardizationStats& stats,
                                               const TrajectoryBatch& data, std::size_t world_d_s,
                                               const EvalSection& eval, std::uint64_t seed);
nlohmann::json to_json(const std::vector<RobustnessResult>& r);

struct PlanSummary {
    std::string planner;
    std::vector<EpisodeOutcome> outcomes;
    double success_rate = 0.0;
    double random_success_rate = 0.0;
};

// Closed-loop evaluation on the configured nav world. LDP needs the
// training data to fit the denoiser on its encoded latents.
PlanSummary evaluate_planning(const ExperimentConfig& cfg, const TcwmModel& model, const StandardizationStats& stats,
                              std::size_t episodes, const TrajectoryBatch* ldp_data);
nlohmann::json to_json(const PlanSummary& s);

}  // namespace tcwm
