#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amr/task_io.hpp"
#include "amr/trainer.hpp"
#include "json.hpp"

namespace amr {

inline constexpr int kConfigSchemaVersion = 1;

enum class DatasetKind { RotatedRegression, PermutedClassification, Manifest };

struct DatasetSpec {
    DatasetKind kind = DatasetKind::RotatedRegression;
    RotatedRegressionSpec rotated;
    PermutedClassificationSpec permuted;
    std::filesystem::path manifest;
    // Generator seed; when unset each run seed generates its own dataset.
    std::optional<std::uint64_t> seed;
};

// Everything needed to reproduce an experiment.
struct RunConfig {
    TrainConfig train;  // train.strategy / train.seed are per-run
    DatasetSpec dataset;
    std::vector<std::uint64_t> seeds = {0};
    std::filesystem::path output_dir = "results";
    std::size_t jobs = 1;  // concurrent (strategy, seed) runs
};

// Parses and validates. Unknown keys and out-of-range values throw ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Overrides one scalar field from text, e.g. ("lr", "0.01"); re-validates.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

nlohmann::ordered_json to_json(const RunConfig& config);

// The tasks a given run seed trains on.
std::vector<TaskDataset> materialize_dataset(const DatasetSpec& spec, std::uint64_t run_seed);

// Hyperparameter grid for sweeps: key -> values. Keys are restricted to
// replay_fraction, probes_per_cluster, probe_every, temperature and beta.
struct SweepGrid {
    std::vector<std::pair<std::string, std::vector<double>>> axes;

    // Cartesian product in axis order, last axis fastest.
    std::vector<std::vector<std::pair<std::string, double>>> points() const;
};

SweepGrid parse_sweep_grid(const nlohmann::json& doc);
SweepGrid load_sweep_grid(const std::filesystem::path& path);

// Applies one grid value to a TrainConfig.
void set_sweep_param(TrainConfig& config, const std::string& key, double value);

}  // namespace amr
