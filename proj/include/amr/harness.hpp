#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "amr/metrics.hpp"
#include "amr/run_config.hpp"
#include "amr/trainer.hpp"
#include "json.hpp"

namespace amr {

inline constexpr int kResultSchemaVersion = 1;

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfigError = 2,
    kExitNumericAbort = 3,
};

struct StrategyRun {
    ExperimentResult result;
    std::optional<NormalizedMetrics> normalized;
};

// Seed-averaged row of the comparison table.
struct ComparisonRow {
    StrategyKind strategy = StrategyKind::Naive;
    std::size_t n_seeds = 0;
    NormalizedMetrics mean;
    double final_loss_raw = 0.0;
    double forgetting_raw = 0.0;
    double selecting_passes = 0.0;
    double training_passes = 0.0;
};

struct Comparison {
    std::vector<StrategyRun> runs;  // strategy-major, seeds in config order
    std::vector<ComparisonRow> rows;
};

// Runs every (strategy, seed) pair, up to config.jobs at a time. Results come
// back in input order and do not depend on the job count.
std::vector<ExperimentResult> execute_runs(const RunConfig& config,
                                           const std::vector<std::pair<StrategyKind, std::uint64_t>>& plan);

// Runs the given strategies (Oracle and Base are always added as anchors)
// and normalizes each seed against that seed's anchors.
Comparison compare_strategies(const RunConfig& config,
                              const std::vector<StrategyKind>& strategies = {kAllStrategies.begin(),
                                                                             kAllStrategies.end()});

// Percentages of one run against its seed's Oracle and Base runs. The Oracle
// is the 0% anchor for forgetting as well as final loss.
NormalizedMetrics normalize_run(const ExperimentResult& run, const ExperimentResult& oracle,
                                const ExperimentResult& base);

nlohmann::ordered_json result_to_json(const StrategyRun& run, const RunConfig& config);
std::string comparison_csv(const Comparison& comparison);
std::string per_seed_csv(const Comparison& comparison);
std::string format_table(const Comparison& comparison);

// Writes via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

// Subcommands. Each maps failures to exit codes: 2 for configuration, usage
// and load errors, 3 for numeric aborts.
int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_compare(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunConfig& config, const SweepGrid& grid, std::ostream& out, std::ostream& err);

// Runs `body` and converts library exceptions into exit codes.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace amr
