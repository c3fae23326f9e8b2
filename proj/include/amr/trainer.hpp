#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "amr/bandit.hpp"
#include "amr/cost_ledger.hpp"
#include "amr/dataset.hpp"
#include "amr/forgetting.hpp"
#include "amr/memory_store.hpp"
#include "amr/metrics.hpp"
#include "amr/model.hpp"

namespace amr {

inline constexpr std::array<StrategyKind, 6> kAllStrategies = {
    StrategyKind::Oracle,   StrategyKind::Base,     StrategyKind::Naive,
    StrategyKind::StandardRehearsal, StrategyKind::Adaptive, StrategyKind::AdaptiveZeroCost,
};

std::string to_string(StrategyKind s);
// Accepts the snake_case names printed by to_string.
StrategyKind parse_strategy(const std::string& name);
// Human-readable row label used in tables.
std::string display_name(StrategyKind s);

inline constexpr double kDivergenceLimit = 1e6;

struct TrainConfig {
    StrategyKind strategy = StrategyKind::Adaptive;
    double lr = 0.05;
    std::size_t batch_size = 128;
    double replay_fraction = 0.5;  // |M| / B
    double temperature = kDefaultTemperature;
    double beta = kDefaultBeta;
    std::size_t probes_per_cluster = 2;
    std::size_t probe_every = 1;
    std::size_t iterations_per_task = 200;
    std::size_t pretrain_iterations = 200;
    double replay_weight = 1.0;  // alpha on replayed examples' losses
    std::uint64_t seed = 0;
    bool iid_task_balanced = false;

    std::vector<std::size_t> hidden = {32};
    Activation activation = Activation::Tanh;

    // Worker threads for test-set evaluation. Results do not depend on it.
    std::size_t eval_threads = 1;
    // Keep the per-iteration mu trajectory in each TaskReport.
    bool record_mu_trajectory = false;

    // round(replay_fraction * batch_size)
    std::size_t replay_count() const;
};

// Throws ConfigError on out-of-range fields.
void validate(const TrainConfig& config);

struct TaskReport {
    int task_id = 0;
    std::size_t iterations = 0;
    std::vector<double> test_losses;  // one entry per task in the sequence
    CostLedger ledger_delta;
    std::vector<std::vector<double>> mu_trajectory;
    std::vector<std::uint64_t> replay_cluster_histogram;  // replayed examples per source task
};

struct ExperimentResult {
    StrategyKind strategy = StrategyKind::Naive;
    std::uint64_t seed = 0;
    LossMatrix loss_matrix;
    CostLedger ledger;
    double final_loss_raw = 0.0;
    ForgettingValue forgetting;
    std::vector<TaskReport> task_reports;
};

// A training batch with the provenance of every element.
struct ComposedBatch {
    std::vector<Example> examples;
    std::vector<bool> from_replay;

    std::size_t size() const { return examples.size(); }
    std::size_t replay_count() const;
};

// Keeps |B| - |M| uniformly chosen new examples, adds the whole replay
// buffer and shuffles. With an empty buffer the new batch is returned as is.
ComposedBatch compose_batch(std::vector<Example> new_batch, const ReplayBuffer& replay, Rng& rng);

// Iteration count for a task with `num_clusters` stored clusters. For
// AdaptiveZeroCost this is the largest n whose predicted passes
// (3B per iteration plus one forward per probe) fit within naive fine-tuning's
// 3B * iterations_per_task; every other strategy gets iterations_per_task.
std::size_t effective_iterations(const TrainConfig& config, std::size_t num_clusters);

// Predicted selection passes of n adaptive iterations.
std::uint64_t predicted_selection_passes(const TrainConfig& config, std::size_t num_clusters, std::size_t n);

// Epoch-wise shuffled walk over a dataset.
class BatchCursor {
public:
    BatchCursor(const std::vector<Example>& data, Rng rng);
    std::vector<Example> next(std::size_t n);

private:
    void reshuffle();

    const std::vector<Example>* data_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

struct TaskOutcome {
    ModelParams model;
    TaskReport report;
};

// One continual-learning task for the Naive, StandardRehearsal, Adaptive,
// AdaptiveZeroCost and Base strategies. `store` holds every earlier task and
// `snap` was taken from `model` at this boundary.
TaskOutcome train_task(ModelParams model, const MemoryStore& store, BaselineSnapshot& snap, const TaskDataset& task,
                       const TrainConfig& config, CostLedger& ledger);

// Plain iid SGD over `data` (pre-training and the Oracle's joint re-training).
ModelParams train_iid(ModelParams model, const std::vector<Example>& data, std::size_t iterations,
                      const TrainConfig& config, Rng rng, CostLedger* ledger, const std::string& context);

// Mean test loss of every task, fanned out over config.eval_threads.
std::vector<double> evaluate_tasks(const ModelParams& model, const std::vector<TaskDataset>& tasks,
                                   std::size_t threads = 1);

// Task 0 is the pre-training task shared by every strategy (not charged to
// the ledger); tasks 1.. are learned continually.
ExperimentResult run_sequence(const std::vector<TaskDataset>& tasks, const TrainConfig& config);

}  // namespace amr
