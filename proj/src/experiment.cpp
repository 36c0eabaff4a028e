#include "tcwm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <spdlog/spdlog.h>

#include "tcwm/diffusion.hpp"
#include "tcwm/errors.hpp"
#include "tcwm/rng.hpp"

namespace tcwm {

using nlohmann::json;

namespace {

json probe_json(const ProbeResult& p) {
    return {{"r2_mean", p.r2_mean}, {"r2_std", p.r2_std}, {"r2_per_dim", p.r2_per_dim}, {"block", to_string(p.block)}};
}

double mean_visual_ssim(const TcwmModel& model, const Tensor& joint, const Tensor& renders) {
    const ModelConfig& cfg = model.config();
    const Tensor xhat = cfg.direct_embedding ? joint : model.decode_embedding(model.encode(joint));
    const Tensor images = model.visual_decoder.forward(column_block(xhat, 0, cfg.d_x));
    double sum = 0.0;
    std::vector<Real> clipped(images.cols());
    for (std::size_t r = 0; r < images.rows(); ++r) {
        const auto row = images.row(r);
        std::transform(row.begin(), row.end(), clipped.begin(), [](Real v) { return std::clamp(v, Real(0), Real(1)); });
        sum += ssim(clipped, renders.row(r), kRenderSide);
    }
    return images.rows() ? sum / double(images.rows()) : 0.0;
}

constexpr std::uint64_t kModelStream = 0x6d6f64656c;

}  // namespace

TrainedModel train_experiment(const ExperimentConfig& cfg, const TrajectoryBatch& data) {
    const ModelConfig mc = cfg.resolved_model();
    TrainedModel t{TcwmModel(mc, derive_seed(cfg.seed, kModelStream)), {}};
    spdlog::info("training {} model: d_z {}, d_s {}, {} epochs", to_string(cfg.training.loss.mode), mc.d_z, mc.d_s,
                 cfg.training.epochs);
    t.result = train(t.model, data, cfg.resolved_training());
    return t;
}

EncodedDataset encode_with(const TcwmModel& model, const StandardizationStats& stats, const TrajectoryBatch& data) {
    EncodedDataset e;
    e.proprio_std = stats.standardize(data.proprio);
    e.joint = model.embed_joint(data.embeddings, e.proprio_std);
    e.latents = model.encode(e.joint);
    return e;
}

Tensor column_block(const Tensor& t, std::size_t first, std::size_t count) {
    if (first + count > t.cols()) throw DimensionError("column_block: columns out of range");
    Tensor out = Tensor::matrix(t.rows(), count);
    for (std::size_t r = 0; r < t.rows(); ++r) std::copy_n(t.row(r).data() + first, count, out.row(r).data());
    return out;
}

ProbeSummary summarize_probe(const TcwmModel& model, TrainMode mode, const StandardizationStats& stats,
                             const TrajectoryBatch& data, std::size_t world_d_s, const EvalSection& eval) {
    if (world_d_s > data.latents.cols()) throw DimensionError("summarize_probe: world d_s exceeds the true latent");
    const auto enc = encode_with(model, stats, data);
    const Tensor task = model.task_block(enc.latents);
    const Tensor complement = model.complement_block(enc.latents);
    const Tensor true_task = column_block(data.latents, 0, world_d_s);
    const Tensor true_distractor = column_block(data.latents, world_d_s, data.latents.cols() - world_d_s);

    ProbeSummary s;
    s.mode = mode;
    s.proprio_task = linear_probe(task, data.proprio, eval.folds, eval.ridge_alpha, LatentBlock::task);
    s.proprio_complement = linear_probe(complement, data.proprio, eval.folds, eval.ridge_alpha, LatentBlock::complement);
    s.proprio_full = linear_probe(enc.latents, data.proprio, eval.folds, eval.ridge_alpha, LatentBlock::full);
    if (true_distractor.cols() > 0)
        s.distractor_full = linear_probe(enc.latents, true_distractor, eval.folds, eval.ridge_alpha, LatentBlock::full);
    s.affine_r2 = affine_recovery(task, true_task).r2;
    s.effective_rank = effective_rank(enc.latents);
    s.variances = latent_variances(enc.latents);
    if (eval.rollout_horizon > 0)
        s.rollout = rollout_mse(model, data, stats, eval.rollout_horizon, 0, data.episodes());
    if (model.config().visual_decoder && !model.visual_decoder.empty() && data.has_renders())
        s.visual_ssim = mean_visual_ssim(model, enc.joint, data.renders);
    return s;
}

json to_json(const ProbeSummary& s) {
    return {{"mode", to_string(s.mode)},
            {"proprio_task", probe_json(s.proprio_task)},
            {"proprio_complement", probe_json(s.proprio_complement)},
            {"proprio_full", probe_json(s.proprio_full)},
            {"distractor_full", probe_json(s.distractor_full)},
            {"affine_r2", s.affine_r2},
            {"effective_rank", s.effective_rank},
            {"latent_variances", s.variances},
            {"rollout_mse", s.rollout},
            {"visual_ssim", s.visual_ssim}};
}

AssumptionReport verify_assumptions(const TcwmModel& model, const StandardizationStats& stats,
                                    const TrajectoryBatch& data, const EvalSection& eval, std::uint64_t seed) {
    const auto enc = encode_with(model, stats, data);
    AssumptionReport r;
    r.a1 = check_a1(model, enc.latents, eval.a1_pairs, eval.a1_delta, derive_seed(seed, 0xa1));
    r.a2 = check_a2(enc.latents, enc.joint, eval.a2_pairs, derive_seed(seed, 0xa2));
    r.a4 = check_a4(enc.latents, model.config().d_s, data.proprio, eval.folds, eval.ridge_alpha);
    return r;
}

json to_json(const AssumptionReport& r) {
    return {{"a1",
             {{"p5", r.a1.p5}, {"p50", r.a1.p50}, {"p95", r.a1.p95}, {"pairs", r.a1.pairs}, {"pass", r.a1.pass}}},
            {"a2",
             {{"spearman", r.a2.spearman},
              {"pearson", r.a2.pearson},
              {"defined", r.a2.defined},
              {"near_zero_embedding", r.a2.near_zero_embedding},
              {"pairs", r.a2.pairs}}},
            {"a4",
             {{"task", probe_json(r.a4.task)},
              {"complement", probe_json(r.a4.complement)},
              {"efficiency_task", r.a4.efficiency_task},
              {"efficiency_complement", r.a4.efficiency_complement},
              {"efficiency_ratio", r.a4.efficiency_ratio}}}};
}

std::vector<RobustnessResult> robustness_probe(const TcwmModel& model, const StandardizationStats& stats,
                                               const TrajectoryBatch& data, std::size_t world_d_s,
                                               const EvalSection& eval, std::uint64_t seed) {
    if (data.episodes() < 2) throw DomainError("robustness_probe: need at least two episodes");
    if (world_d_s >= data.latents.cols()) throw DomainError("robustness_probe: world has no distractor state");
    const std::size_t n_fit = std::clamp<std::size_t>(
        std::size_t(std::lround(0.8 * double(data.episodes()))), 1, data.episodes() - 1);
    const TrajectoryBatch fit = data.select_episodes(0, n_fit);
    const TrajectoryBatch test = data.select_episodes(n_fit, data.episodes() - n_fit);
    const std::size_t d_c = data.latents.cols() - world_d_s;
    const Tensor fit_y = column_block(fit.latents, world_d_s, d_c);
    const Tensor test_y = column_block(test.latents, world_d_s, d_c);

    const Tensor fit_z = encode_with(model, stats, fit).latents;
    const Tensor clean_z = encode_with(model, stats, test).latents;
    const double clean = probe_transfer_r2(fit_z, fit_y, clean_z, test_y, eval.ridge_alpha);

    std::vector<RobustnessResult> out;
    for (PerturbKind kind : {PerturbKind::gauss_noise, PerturbKind::channel_jitter}) {
        PerturbOptions opt;
        opt.kind = kind;
        opt.seed = derive_seed(seed, 0x70657274, std::uint64_t(kind));
        const Tensor z = encode_with(model, stats, perturb(test, opt)).latents;
        RobustnessResult r;
        r.kind = kind;
        r.clean_r2 = clean;
        r.perturbed_r2 = probe_transfer_r2(fit_z, fit_y, z, test_y, eval.ridge_alpha);
        r.relative_drop = (clean - r.perturbed_r2) / std::max(std::fabs(clean), 1e-12);
        out.push_back(r);
    }
    return out;
}

json to_json(const std::vector<RobustnessResult>& r) {
    json j = json::object();
    for (const auto& e : r)
        j[to_string(e.kind)] = {
            {"clean_r2", e.clean_r2}, {"perturbed_r2", e.perturbed_r2}, {"relative_drop", e.relative_drop}};
    return j;
}

PlanSummary evaluate_planning(const ExperimentConfig& cfg, const TcwmModel& model, const StandardizationStats& stats,
                              std::size_t episodes, const TrajectoryBatch* ldp_data) {
    const NavEnv env = make_nav(cfg);
    const NavObserver observer(env, model, stats);
    const std::uint64_t seed = derive_seed(cfg.seed, 0x706c616e);
    const std::size_t max_steps = cfg.planner.max_steps;

    PlanSummary s;
    s.planner = to_string(cfg.planner.kind);
    if (cfg.planner.kind == PlannerKind::cem) {
        const CemConfig cem = cfg.planner.cem;
        s.outcomes = evaluate_controller(
            env, [&] { return std::make_unique<CemController>(observer, cem); }, episodes, max_steps, seed);
    } else {
        if (!ldp_data) throw ValidationError("the ldp planner needs the training dataset");
        const auto enc = encode_with(model, stats, *ldp_data);
        const LdpPlanner planner = train_ldp(enc.latents, ldp_data->actions, ldp_data->episode_starts,
                                             cfg.planner.diffusion, cfg.world.spec.action_low,
                                             cfg.world.spec.action_high);
        s.outcomes = evaluate_controller(
            env, [&] { return std::make_unique<LdpController>(observer, planner); }, episodes, max_steps, seed);
    }
    s.success_rate = success_rate(s.outcomes);
    const WorldSpec spec = cfg.world.spec;
    s.random_success_rate = success_rate(evaluate_controller(
        env, [&] { return std::make_unique<RandomController>(spec); }, episodes, max_steps, seed));
    return s;
}

json to_json(const PlanSummary& s) {
    std::vector<std::size_t> steps;
    std::size_t successes = 0;
    for (const auto& o : s.outcomes) {
        steps.push_back(o.steps);
        successes += o.success;
    }
    return {{"planner", s.planner},
            {"episodes", s.outcomes.size()},
            {"successes", successes},
            {"success_rate", s.success_rate},
            {"random_success_rate", s.random_success_rate},
            {"steps", steps}};
}

}  // namespace tcwm
