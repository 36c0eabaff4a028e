#pragma once

// The CLI subcommands as library calls. Each validates all of its inputs
// before writing anything, returns a JSON summary, and writes only under
// `out`. Errors surface as the exceptions in errors.hpp.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "tcwm/config.hpp"
#include "tcwm/model.hpp"

namespace tcwm {

using OptionalPath = std::optional<std::filesystem::path>;

// Experiment config stored in a checkpoint by cmd_train.
ExperimentConfig checkpoint_config(const Checkpoint& ckpt);

nlohmann::json cmd_gen(const std::filesystem::path& config, const OptionalPath& out);
nlohmann::json cmd_train(const std::filesystem::path& config, const std::filesystem::path& data,
                         const OptionalPath& out);
nlohmann::json cmd_probe(const std::filesystem::path& model, const std::filesystem::path& data,
                         const OptionalPath& out);
nlohmann::json cmd_verify(const std::filesystem::path& model, const std::filesystem::path& data,
                          const OptionalPath& out);
// `data` is required by the ldp planner only.
nlohmann::json cmd_plan(const std::filesystem::path& model, std::optional<std::size_t> episodes,
                        const OptionalPath& data, const OptionalPath& out);
nlohmann::json cmd_ablate(const std::filesystem::path& config, const std::string& preset, const OptionalPath& out);

}  // namespace tcwm
