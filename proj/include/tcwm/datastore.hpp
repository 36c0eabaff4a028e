#pragma once

// Dataset directories:
//   meta.json       dims, counts, dtype tag "f32le", per-array shapes, seed, world snapshot
//   <array>.f32     little-endian float32, row-major, no header
//   boundaries.json episode start offsets
// Files are written to a temporary name and renamed into place; meta.json is
// validated in full before any array is read.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcwm/tensor.hpp"
#include "tcwm/world.hpp"

namespace tcwm {

inline constexpr const char* kDtypeTag = "f32le";

void save_dataset(const TrajectoryBatch& batch, const std::filesystem::path& dir,
                  const nlohmann::json& extra_meta = nlohmann::json::object());
TrajectoryBatch load_dataset(const std::filesystem::path& dir);
nlohmann::json load_dataset_meta(const std::filesystem::path& dir);

// Raw array helpers shared with checkpoints.
void write_f32(const std::filesystem::path& file, std::span<const Real> values);
std::vector<Real> read_f32(const std::filesystem::path& file, std::size_t expected_count, const std::string& name);
// Writes text via temp-then-rename.
void write_text_atomic(const std::filesystem::path& file, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& file);

struct StandardizationStats {
    static constexpr double kStdFloor = 1e-6;
    std::vector<double> mean;
    std::vector<double> std;

    std::size_t dims() const noexcept { return mean.size(); }
    Tensor standardize(const Tensor& x) const;
    Tensor unstandardize(const Tensor& x) const;
    void standardize_inplace(std::span<Real> row) const;

    nlohmann::json to_json() const;
    static StandardizationStats from_json(const nlohmann::json& j);
};

// Population mean/std per column, std floored at 1e-6.
StandardizationStats compute_stats(const Tensor& samples);

}  // namespace tcwm
