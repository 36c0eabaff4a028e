#include "tcwm/commands.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "tcwm/datastore.hpp"
#include "tcwm/errors.hpp"
#include "tcwm/experiment.hpp"
#include "tcwm/planning.hpp"
#include "tcwm/report.hpp"
#include "tcwm/rng.hpp"
#include "tcwm/training.hpp"

namespace tcwm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path output_dir(const OptionalPath& out, const ExperimentConfig& cfg) {
    return out ? *out : fs::path(cfg.output);
}

json generator_meta(const ExperimentConfig& cfg) {
    const json j = cfg.to_json();
    return {{"world", j.at("world")}, {"seed", j.at("seed")}};
}

void check_dataset_dims(const TrajectoryBatch& data, const ModelConfig& mc, bool needs_renders) {
    if (data.embeddings.cols() != mc.d_x || data.proprio.cols() != mc.d_p || data.actions.cols() != mc.d_a)
        throw ValidationError("dataset dims (d_x " + std::to_string(data.embeddings.cols()) + ", d_p " +
                              std::to_string(data.proprio.cols()) + ", d_a " + std::to_string(data.actions.cols()) +
                              ") do not match the model (" + std::to_string(mc.d_x) + ", " + std::to_string(mc.d_p) +
                              ", " + std::to_string(mc.d_a) + ")");
    if (needs_renders && !data.has_renders()) throw ValidationError("the visual decoder needs a dataset with renders");
}

// Rejects data made by a different world than the config describes.
void check_generator(const json& data_meta, const ExperimentConfig& cfg) {
    if (!data_meta.contains("generator")) return;
    if (data_meta.at("generator") != generator_meta(cfg))
        throw ValidationError("dataset was generated from a different world section or seed than the config");
}

LineChart loss_chart(const TrainReport& report) {
    LineChart c{"training loss", "epoch", "loss", {}, true, {}};
    ChartSeries train{"train total", {}}, eval{"eval total", {}}, dyn{"eval dyn_z", {}};
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
        c.x_values.push_back(double(e + 1));
        train.values.push_back(report.epochs[e].train.total);
        eval.values.push_back(report.epochs[e].eval.total);
        dyn.values.push_back(report.epochs[e].eval.dyn_z);
    }
    c.series = {train, eval, dyn};
    return c;
}

LineChart rollout_chart(const std::vector<std::pair<std::string, std::vector<double>>>& curves) {
    LineChart c{"open-loop rollout error", "steps ahead", "normalised MSE", {}, true, {}};
    std::size_t n = 0;
    for (const auto& [name, v] : curves) {
        c.series.push_back({name, v});
        n = std::max(n, v.size());
    }
    for (std::size_t i = 0; i < n; ++i) c.x_values.push_back(double(i + 1));
    return c;
}

json loss_json(const LossBreakdown& l) {
    return {{"dyn_z", l.dyn_z}, {"dyn_s", l.dyn_s}, {"align", l.align}, {"rec", l.rec}, {"l1", l.l1}, {"total", l.total}};
}

// Checkpoint plus training log, report and loss chart.
json write_training(const fs::path& out, const ExperimentConfig& cfg, const json& generator, const TrainedModel& t) {
    json meta = {{"experiment", cfg.to_json()}, {"train_episodes", t.result.train_episodes}};
    if (!generator.is_null()) meta["generator"] = generator;
    save_checkpoint(t.model, t.result.stats, out, meta);
    t.result.report.write_csv(out / "train_log.csv");
    const json summary = {{"mode", to_string(cfg.training.loss.mode)},
                          {"epochs", t.result.report.epochs.size()},
                          {"train_episodes", t.result.train_episodes},
                          {"initial_eval", loss_json(t.result.report.initial_eval)},
                          {"final_eval", loss_json(t.result.report.final_eval)}};
    write_json_report(out / "train_report.json", summary);
    write_svg_chart(out / "loss.svg", loss_chart(t.result.report));
    return summary;
}

json probe_json(const ExperimentConfig& cfg, const TcwmModel& model, const StandardizationStats& stats,
                const TrajectoryBatch& data) {
    const std::size_t d_s = cfg.world.spec.d_s;
    json j = {{"probe", to_json(summarize_probe(model, cfg.training.loss.mode, stats, data, d_s, cfg.eval))}};
    if (cfg.eval.robustness && cfg.world.spec.d_c > 0 && data.episodes() >= 2)
        j["robustness"] = to_json(robustness_probe(model, stats, data, d_s, cfg.eval, cfg.seed));
    return j;
}

struct Loaded {
    Checkpoint ckpt;
    ExperimentConfig cfg;
};

Loaded load_model(const fs::path& dir) {
    Loaded l{load_checkpoint(dir), {}};
    l.cfg = checkpoint_config(l.ckpt);
    return l;
}

TrajectoryBatch load_compatible(const fs::path& data_dir, const Loaded& l) {
    TrajectoryBatch data = load_dataset(data_dir);
    check_dataset_dims(data, l.ckpt.model.config(), false);
    return data;
}

// World used for planning: the generator of the training data when known.
ExperimentConfig planning_config(const Loaded& l) {
    ExperimentConfig cfg = l.cfg;
    if (l.ckpt.meta.contains("generator")) {
        json j = cfg.to_json();
        j["world"] = l.ckpt.meta["generator"].at("world");
        j["seed"] = l.ckpt.meta["generator"].at("seed");
        const ExperimentConfig gen = parse_config(j);
        cfg.world = gen.world;
    }
    if (cfg.world.kind != WorldKind::nav) throw ValidationError("plan: the model was not trained on a nav world");
    return cfg;
}

}  // namespace

ExperimentConfig checkpoint_config(const Checkpoint& ckpt) {
    if (!ckpt.meta.contains("experiment")) throw ValidationError("checkpoint has no experiment config");
    return parse_config(ckpt.meta.at("experiment"));
}

json cmd_gen(const fs::path& config, const OptionalPath& out) {
    const ExperimentConfig cfg = load_config(config);
    const fs::path dir = output_dir(out, cfg);
    spdlog::info("generating {} episodes x {} steps ({} world)", cfg.world.generate.n_traj,
                 cfg.world.generate.horizon, to_string(cfg.world.kind));
    const TrajectoryBatch batch = generate(cfg);
    save_dataset(batch, dir, {{"generator", generator_meta(cfg)}});
    return {{"episodes", batch.episodes()}, {"steps", batch.steps()}, {"renders", batch.has_renders()}};
}

json cmd_train(const fs::path& config, const fs::path& data_dir, const OptionalPath& out) {
    const ExperimentConfig cfg = load_config(config);
    const fs::path dir = output_dir(out, cfg);
    const json data_meta = load_dataset_meta(data_dir);
    check_generator(data_meta, cfg);
    const TrajectoryBatch data = load_dataset(data_dir);
    check_dataset_dims(data, cfg.resolved_model(), cfg.model.visual_decoder);
    const TrainedModel t = train_experiment(cfg, data);
    return write_training(dir, cfg, data_meta.value("generator", json(nullptr)), t);
}

json cmd_probe(const fs::path& model, const fs::path& data_dir, const OptionalPath& out) {
    const Loaded l = load_model(model);
    const TrajectoryBatch data = load_compatible(data_dir, l);
    const json j = probe_json(l.cfg, l.ckpt.model, l.ckpt.stats, data);
    if (out) {
        write_json_report(*out / "probe.json", j);
        write_svg_chart(*out / "rollout.svg",
                        rollout_chart({{l.cfg.training.loss.mode == TrainMode::tcwm ? "model"
                                                                                    : to_string(l.cfg.training.loss.mode),
                                        j["probe"]["rollout_mse"].get<std::vector<double>>()}}));
    }
    return j;
}

json cmd_verify(const fs::path& model, const fs::path& data_dir, const OptionalPath& out) {
    const Loaded l = load_model(model);
    const TrajectoryBatch data = load_compatible(data_dir, l);
    const json j = to_json(verify_assumptions(l.ckpt.model, l.ckpt.stats, data, l.cfg.eval, l.cfg.seed));
    if (out) write_json_report(*out / "assumptions.json", j);
    return j;
}

json cmd_plan(const fs::path& model, std::optional<std::size_t> episodes, const OptionalPath& data_dir,
              const OptionalPath& out) {
    const Loaded l = load_model(model);
    const ExperimentConfig cfg = planning_config(l);
    const std::size_t n = episodes.value_or(cfg.planner.episodes);
    if (n == 0) throw ValidationError("plan: --episodes must be positive");
    std::optional<TrajectoryBatch> data;
    if (cfg.planner.kind == PlannerKind::ldp) {
        if (!data_dir) throw ValidationError("plan: the ldp planner needs --data");
        data = load_compatible(*data_dir, l);
    }
    spdlog::info("planning {} episodes with {}", n, to_string(cfg.planner.kind));
    const PlanSummary s = evaluate_planning(cfg, l.ckpt.model, l.ckpt.stats, n, data ? &*data : nullptr);
    const json j = to_json(s);
    if (out) {
        write_json_report(*out / "plan.json", j);
        write_episode_csv(s.outcomes, *out / "episodes.csv");
    }
    return j;
}

json cmd_ablate(const fs::path& config, const std::string& preset, const OptionalPath& out) {
    const json raw = load_config_json(config);
    const ExperimentConfig base = parse_config(raw);
    json patched = raw;
    patched.merge_patch(preset_overlay(preset));
    const ExperimentConfig variant = parse_config(patched);
    const fs::path dir = output_dir(out, base);
    const bool sweep = preset == "split-sweep";
    if (sweep && variant.sweep.split_sizes.empty()) throw ValidationError("ablate: split-sweep has no split sizes");
    std::vector<ExperimentConfig> sweep_configs;
    for (std::size_t k : sweep ? variant.sweep.split_sizes : std::vector<std::size_t>{}) {
        sweep_configs.push_back(variant);
        sweep_configs.back().model.d_s = k;
        sweep_configs.back().validate();
    }
    const bool nav = base.world.kind == WorldKind::nav;

    const TrajectoryBatch data = generate(base);
    save_dataset(data, dir / "data", {{"generator", generator_meta(base)}});
    const json gen = generator_meta(base);

    // Train, probe and (on nav worlds) plan one configuration.
    auto run = [&](const ExperimentConfig& cfg, const fs::path& sub) {
        const TrainedModel t = train_experiment(cfg, data);
        json r = {{"train", write_training(sub, cfg, gen, t)}};
        const json p = probe_json(cfg, t.model, t.result.stats, data);
        write_json_report(sub / "probe.json", p);
        r.update(p);
        if (nav) {
            const PlanSummary s = evaluate_planning(cfg, t.model, t.result.stats, cfg.planner.episodes, &data);
            write_episode_csv(s.outcomes, sub / "episodes.csv");
            r["plan"] = to_json(s);
        }
        return r;
    };

    json summary = {{"preset", preset}};
    if (sweep) {
        json rows = json::array();
        LineChart chart{"split-size sweep", "d_s", "value", {}, false, {}};
        ChartSeries task{"probe R2 z^s -> s^p", {}}, rollout{"rollout MSE step 1", {}}, rank{"effective rank / d_z", {}};
        for (const ExperimentConfig& cfg : sweep_configs) {
            const std::size_t k = cfg.model.d_s;
            const json r = run(cfg, dir / ("split-" + std::to_string(k)));
            const json& p = r.at("probe");
            const double d_z = double(cfg.resolved_model().d_z);
            rows.push_back({{"d_s", k}, {"result", r}});
            chart.x_values.push_back(double(k));
            task.values.push_back(p.at("proprio_task").at("r2_mean"));
            rollout.values.push_back(p.at("rollout_mse").empty() ? 0.0 : p.at("rollout_mse")[0].get<double>());
            rank.values.push_back(p.at("effective_rank").get<double>() / d_z);
        }
        chart.series = {task, rollout, rank};
        write_svg_chart(dir / "sweep.svg", chart);
        summary["sweep"] = rows;
    } else {
        const json full = run(base, dir / "full");
        const json ablated = run(variant, dir / preset);
        write_svg_chart(dir / "rollout.svg",
                        rollout_chart({{"full", full.at("probe").at("rollout_mse").get<std::vector<double>>()},
                                       {preset, ablated.at("probe").at("rollout_mse").get<std::vector<double>>()}}));
        summary["full"] = full;
        summary["ablated"] = ablated;
    }
    write_json_report(dir / "ablation.json", summary);
    return summary;
}

}  // namespace tcwm
