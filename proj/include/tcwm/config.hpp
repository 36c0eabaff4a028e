#pragma once

// Experiment configuration: one JSON tree with sections world, model,
// training, planner, eval, sweep plus output and seed. Every field has a
// default; unknown keys anywhere in the tree are rejected together.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcwm/diffusion.hpp"
#include "tcwm/model.hpp"
#include "tcwm/planning.hpp"
#include "tcwm/training.hpp"
#include "tcwm/world.hpp"

namespace tcwm {

enum class WorldKind { synthetic, nav };
std::string to_string(WorldKind k);

struct WorldSection {
    WorldKind kind = WorldKind::synthetic;
    WorldSpec spec;
    NavSpec nav;
    GenerateOptions generate;  // generate.seed is derived from the global seed
};

enum class PlannerKind { cem, ldp };
std::string to_string(PlannerKind k);

struct PlannerSection {
    PlannerKind kind = PlannerKind::cem;
    CemConfig cem;
    DiffusionConfig diffusion;
    std::size_t episodes = 50;
    std::size_t max_steps = 50;
};

struct EvalSection {
    bool probe = true;
    bool assumptions = true;
    bool robustness = true;
    std::size_t folds = 5;
    double ridge_alpha = 1.0;
    std::size_t a1_pairs = 4096;
    double a1_delta = 1e-3;
    std::size_t a2_pairs = 2048;
    std::size_t rollout_horizon = 5;
};

struct SweepSection {
    std::vector<std::size_t> split_sizes;  // model d_s values for split-sweep
};

struct ExperimentConfig {
    WorldSection world;
    ModelConfig model;  // d_x, d_p, d_a follow the world; d_z, d_s of 0 do too (the parsed default)
    TrainConfig training;
    PlannerSection planner;
    EvalSection eval;
    SweepSection sweep;
    std::string output = "out";
    std::uint64_t seed = 0;

    // Model config with the world-derived dimensions filled in.
    ModelConfig resolved_model() const;
    TrainConfig resolved_training() const;
    void validate() const;
    nlohmann::json to_json() const;
};

// Strict parse: throws ValidationError naming every unknown key path.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json load_config_json(const std::filesystem::path& file);
ExperimentConfig load_config(const std::filesystem::path& file);

// Preset overlays shipped with the build (JSON merge patches).
std::vector<std::string> preset_names();
nlohmann::json preset_overlay(const std::string& name);
nlohmann::json default_config_json();

// Builders for the configured world.
World make_world(const ExperimentConfig& cfg);
NavEnv make_nav(const ExperimentConfig& cfg);
TrajectoryBatch generate(const ExperimentConfig& cfg);

}  // namespace tcwm
