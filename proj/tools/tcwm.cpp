// Experiment driver. Prints each subcommand's JSON summary on stdout; logs go
// to stderr (level from SPDLOG_LEVEL). Exit codes: 0 ok, 1 invalid input,
// 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tcwm/commands.hpp"
#include "tcwm/config.hpp"
#include "tcwm/errors.hpp"

namespace {

constexpr int kValidation = 1;
constexpr int kRuntime = 2;

tcwm::OptionalPath optional_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("tcwm"));
    spdlog::cfg::load_env_levels();

    CLI::App app{"Task-centric latent world models on synthetic worlds"};
    app.require_subcommand(1);

    std::string config, data, model, out, preset;
    std::optional<std::size_t> episodes;

    auto* gen = app.add_subcommand("gen", "Generate a trajectory dataset");
    gen->add_option("--config", config, "Experiment config (JSON)")->required();
    gen->add_option("--out", out, "Dataset directory (default: config output)");

    auto* train = app.add_subcommand("train", "Train a world model");
    train->add_option("--config", config, "Experiment config (JSON)")->required();
    train->add_option("--data", data, "Dataset directory")->required();
    train->add_option("--out", out, "Checkpoint directory (default: config output)");

    auto* probe = app.add_subcommand("probe", "Linear probes, effective rank, rollout error, robustness");
    probe->add_option("--model", model, "Checkpoint directory")->required();
    probe->add_option("--data", data, "Dataset directory")->required();
    probe->add_option("--out", out, "Report directory");

    auto* verify = app.add_subcommand("verify", "Check the identifiability assumptions A1, A2, A4");
    verify->add_option("--model", model, "Checkpoint directory")->required();
    verify->add_option("--data", data, "Dataset directory")->required();
    verify->add_option("--out", out, "Report directory");

    auto* plan = app.add_subcommand("plan", "Closed-loop goal reaching on the nav world");
    plan->add_option("--model", model, "Checkpoint directory (trained on a nav world)")->required();
    plan->add_option("--episodes", episodes, "Episodes (default: config planner.episodes)");
    plan->add_option("--data", data, "Training dataset (ldp planner only)");
    plan->add_option("--out", out, "Report directory");

    auto* ablate = app.add_subcommand("ablate", "Train the full model and an ablation preset on one dataset");
    ablate->add_option("--config", config, "Experiment config (JSON)")->required();
    ablate->add_option("--preset", preset, "Ablation preset")
        ->required()
        ->check(CLI::IsMember(tcwm::preset_names()));
    ablate->add_option("--out", out, "Output directory (default: config output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kValidation;
    }

    try {
        nlohmann::json summary;
        const auto o = optional_path(out);
        if (*gen) summary = tcwm::cmd_gen(config, o);
        else if (*train) summary = tcwm::cmd_train(config, data, o);
        else if (*probe) summary = tcwm::cmd_probe(model, data, o);
        else if (*verify) summary = tcwm::cmd_verify(model, data, o);
        else if (*plan) summary = tcwm::cmd_plan(model, episodes, optional_path(data), o);
        else if (*ablate) summary = tcwm::cmd_ablate(config, preset, o);
        std::cout << summary.dump(2) << '\n';
        return 0;
    } catch (const tcwm::ValidationError& e) {
        spdlog::error("{}", e.what());
        return kValidation;
    } catch (const tcwm::IoError& e) {
        spdlog::error("{}", e.what());
        return e.kind() == tcwm::IoErrorKind::write_failed ? kRuntime : kValidation;
    } catch (const nlohmann::json::exception& e) {
        spdlog::error("malformed JSON input: {}", e.what());
        return kValidation;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kRuntime;
    }
}
