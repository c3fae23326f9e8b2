#include "amr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "amr/errors.hpp"

namespace amr {

std::string to_string(StrategyKind s) {
    switch (s) {
        case StrategyKind::Oracle: return "oracle";
        case StrategyKind::Base: return "base";
        case StrategyKind::Naive: return "naive";
        case StrategyKind::StandardRehearsal: return "standard_rehearsal";
        case StrategyKind::Adaptive: return "adaptive";
        case StrategyKind::AdaptiveZeroCost: return "adaptive_zero_cost";
    }
    return "unknown";
}

StrategyKind parse_strategy(const std::string& name) {
    for (StrategyKind s : kAllStrategies)
        if (to_string(s) == name) return s;
    throw ConfigError("unknown strategy '" + name +
                      "' (expected oracle, base, naive, standard_rehearsal, adaptive or adaptive_zero_cost)");
}

std::string display_name(StrategyKind s) {
    switch (s) {
        case StrategyKind::Oracle: return "Oracle";
        case StrategyKind::Base: return "Base";
        case StrategyKind::Naive: return "Naive";
        case StrategyKind::StandardRehearsal: return "Standard Rehearsal";
        case StrategyKind::Adaptive: return "Adaptive Rehearsal";
        case StrategyKind::AdaptiveZeroCost: return "Adaptive Rehearsal (0 Cost)";
    }
    return "unknown";
}

namespace {

bool is_rehearsal(StrategyKind s) {
    return s == StrategyKind::StandardRehearsal || s == StrategyKind::Adaptive ||
           s == StrategyKind::AdaptiveZeroCost;
}

bool is_adaptive(StrategyKind s) { return s == StrategyKind::Adaptive || s == StrategyKind::AdaptiveZeroCost; }

}  // namespace

std::size_t TrainConfig::replay_count() const {
    return static_cast<std::size_t>(std::llround(replay_fraction * static_cast<double>(batch_size)));
}

void validate(const TrainConfig& c) {
    if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw ConfigError("lr must be positive and finite");
    if (c.batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (!(c.replay_fraction >= 0.0 && c.replay_fraction < 1.0))
        throw ConfigError("replay_fraction must lie in [0, 1)");
    if (c.replay_fraction > 0.0 && c.batch_size < 2)
        throw ConfigError("batch_size must be at least 2 when replay_fraction > 0");
    if (c.replay_fraction > 0.0 && is_rehearsal(c.strategy) && c.replay_count() == 0)
        throw ConfigError("replay_fraction * batch_size rounds to 0 replay examples");
    if (!(c.temperature > 0.0) || !std::isfinite(c.temperature))
        throw ConfigError("temperature must be positive and finite");
    if (!(c.beta > 0.0 && c.beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
    if (c.probe_every == 0) throw ConfigError("probe_every must be at least 1");
    if (c.iterations_per_task == 0) throw ConfigError("iterations_per_task must be at least 1");
    if (!(c.replay_weight >= 0.0) || !std::isfinite(c.replay_weight))
        throw ConfigError("replay_weight must be non-negative and finite");
    if (std::any_of(c.hidden.begin(), c.hidden.end(), [](std::size_t h) { return h == 0; }))
        throw ConfigError("hidden layer sizes must be positive");
    if (c.eval_threads == 0) throw ConfigError("eval_threads must be at least 1");
}

std::size_t ComposedBatch::replay_count() const {
    return static_cast<std::size_t>(std::count(from_replay.begin(), from_replay.end(), true));
}

ComposedBatch compose_batch(std::vector<Example> new_batch, const ReplayBuffer& replay, Rng& rng) {
    const std::size_t b = new_batch.size();
    const std::size_t m = replay.size();
    if (m > b)
        throw ConfigError("compose_batch: replay buffer (" + std::to_string(m) + ") larger than batch (" +
                          std::to_string(b) + ")");
    ComposedBatch out;
    if (m == 0) {
        out.from_replay.assign(b, false);
        out.examples = std::move(new_batch);
        return out;
    }

    std::vector<std::size_t> keep(b);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    std::shuffle(keep.begin(), keep.end(), rng);
    keep.resize(b - m);

    std::vector<std::size_t> order(b);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    // Slots [0, b - m) are survivors, [b - m, b) replay; `order` places them.
    out.examples.reserve(b);
    out.from_replay.reserve(b);
    for (std::size_t slot : order) {
        if (slot < b - m) {
            out.examples.push_back(std::move(new_batch[keep[slot]]));
            out.from_replay.push_back(false);
        } else {
            out.examples.push_back(replay.examples[slot - (b - m)]);
            out.from_replay.push_back(true);
        }
    }
    return out;
}

std::uint64_t predicted_selection_passes(const TrainConfig& config, std::size_t num_clusters, std::size_t n) {
    const std::uint64_t probe_rounds = (n + config.probe_every - 1) / config.probe_every;
    return probe_rounds * num_clusters * config.probes_per_cluster * CostLedger::kForward;
}

std::size_t effective_iterations(const TrainConfig& config, std::size_t num_clusters) {
    const std::size_t n = config.iterations_per_task;
    if (config.strategy != StrategyKind::AdaptiveZeroCost) return n;
    const std::uint64_t per_iter = CostLedger::kForwardBackward * config.batch_size;
    const std::uint64_t budget = per_iter * n;
    // Predicted cost is monotone in the count, so walk down from n.
    std::size_t k = n;
    while (k > 0 && per_iter * k + predicted_selection_passes(config, num_clusters, k) > budget) --k;
    return k;
}

BatchCursor::BatchCursor(const std::vector<Example>& data, Rng rng) : data_(&data), rng_(std::move(rng)) {
    if (data.empty()) throw UsageError("BatchCursor: no data");
    order_.resize(data.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
}

void BatchCursor::reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
}

std::vector<Example> BatchCursor::next(std::size_t n) {
    if (n > order_.size())
        throw ConfigError("batch size " + std::to_string(n) + " exceeds dataset size " + std::to_string(order_.size()));
    if (pos_ + n > order_.size()) reshuffle();
    std::vector<Example> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) batch.push_back((*data_)[order_[pos_ + i]]);
    pos_ += n;
    return batch;
}

namespace {

// One SGD step on the weighted batch mean; guards against divergence.
ModelParams step(const ModelParams& model, const ComposedBatch& batch, const TrainConfig& config,
                 const std::string& context, std::size_t iteration) {
    std::vector<double> weights(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) weights[i] = batch.from_replay[i] ? config.replay_weight : 1.0;
    LossAndGrad lg;
    try {
        lg = backward(model, batch.examples, weights);
    } catch (const NumericError& e) {
        throw NumericError(context + ", iteration " + std::to_string(iteration) + ": " + e.what());
    }
    if (!std::isfinite(lg.mean_loss) || lg.mean_loss > kDivergenceLimit)
        throw NumericError(context + ", iteration " + std::to_string(iteration) + ": batch loss " +
                           std::to_string(lg.mean_loss) + " diverged");
    return sgd_step(model, lg.grads, config.lr);
}

std::string task_context(const TrainConfig& config, int task_id) {
    return "strategy " + to_string(config.strategy) + ", task " + std::to_string(task_id);
}

}  // namespace

ModelParams train_iid(ModelParams model, const std::vector<Example>& data, std::size_t iterations,
                      const TrainConfig& config, Rng rng, CostLedger* ledger, const std::string& context) {
    BatchCursor cursor(data, std::move(rng));
    for (std::size_t j = 0; j < iterations; ++j) {
        ComposedBatch batch;
        batch.examples = cursor.next(config.batch_size);
        batch.from_replay.assign(batch.examples.size(), false);
        model = step(model, batch, config, context, j);
        if (ledger) ledger->charge_training_step(batch.size());
    }
    return model;
}

TaskOutcome train_task(ModelParams model, const MemoryStore& store, BaselineSnapshot& snap, const TaskDataset& task,
                       const TrainConfig& config, CostLedger& ledger) {
    validate(config);
    if (config.strategy == StrategyKind::Oracle)
        throw UsageError("train_task: the Oracle re-trains jointly; use run_sequence");

    TaskReport report;
    report.task_id = task.task_id;
    report.replay_cluster_histogram.assign(store.num_clusters(), 0);
    const CostLedger start = ledger;
    if (config.strategy == StrategyKind::Base) return {std::move(model), std::move(report)};

    const auto tid = static_cast<std::uint32_t>(task.task_id);
    BatchCursor cursor(task.train, make_rng(config.seed, Stream::Batches, tid));
    Rng replay_rng = make_rng(config.seed, Stream::Replay, tid);
    Rng probe_rng = make_rng(config.seed, Stream::Probe, tid);
    Rng removal_rng = make_rng(config.seed, Stream::Removal, tid);

    const bool rehearse = is_rehearsal(config.strategy) && !store.empty();
    const bool adaptive = rehearse && is_adaptive(config.strategy);
    const std::size_t m = rehearse ? config.replay_count() : 0;
    const std::size_t k = store.num_clusters();
    const std::size_t planned = adaptive ? effective_iterations(config, k) : config.iterations_per_task;

    // Zero-cost runs also stop before the real ledger could pass naive's
    // budget; baseline-cache misses are not in the analytic prediction.
    const bool budgeted = adaptive && config.strategy == StrategyKind::AdaptiveZeroCost;
    const std::uint64_t budget = CostLedger::kForwardBackward * config.batch_size * config.iterations_per_task;

    BanditState bandit = adaptive ? init_bandit(k, config.beta, config.temperature) : BanditState{};
    const std::string context = task_context(config, task.task_id);

    std::size_t j = 0;
    for (; j < planned; ++j) {
        const bool probe_now = adaptive && config.probes_per_cluster > 0 && j % config.probe_every == 0;
        if (budgeted) {
            const std::uint64_t worst_probe = probe_now ? 2 * CostLedger::kForward * k * config.probes_per_cluster : 0;
            const std::uint64_t spent = (ledger - start).total();
            if (spent + CostLedger::kForwardBackward * config.batch_size + worst_probe > budget) break;
        }

        std::vector<Example> fresh = cursor.next(config.batch_size);
        ReplayBuffer buffer;
        if (adaptive) {
            if (probe_now) {
                try {
                    bandit = update_means(bandit, probe_clusters(model, snap, store, config.probes_per_cluster,
                                                                 probe_rng, &ledger));
                } catch (const NumericError& e) {
                    throw NumericError(context + ", iteration " + std::to_string(j) + ": " + e.what());
                }
            }
            if (config.record_mu_trajectory) report.mu_trajectory.push_back(bandit.mu);
            if (m > 0) buffer = sample_replay_buffer(bandit, store, m, replay_rng);
        } else if (rehearse && m > 0) {
            buffer.examples = config.iid_task_balanced ? sample_task_balanced_past(store, m, replay_rng)
                                                       : sample_iid_past(store, m, replay_rng);
            for (const Example& e : buffer.examples) buffer.source_clusters.push_back(e.task_id);
        }
        for (int c : buffer.source_clusters) ++report.replay_cluster_histogram[static_cast<std::size_t>(c)];

        const ComposedBatch batch = compose_batch(std::move(fresh), buffer, removal_rng);
        model = step(model, batch, config, context, j);
        ledger.charge_training_step(batch.size());
    }
    report.iterations = j;
    report.ledger_delta = ledger - start;
    return {std::move(model), std::move(report)};
}

std::vector<double> evaluate_tasks(const ModelParams& model, const std::vector<TaskDataset>& tasks,
                                   std::size_t threads) {
    std::vector<double> out(tasks.size(), 0.0);
    auto eval_one = [&](std::size_t t) {
        double sum = 0.0;
        for (const Example& ex : tasks[t].test) sum += per_example_loss(model, ex);
        out[t] = sum / static_cast<double>(tasks[t].test.size());
    };
    threads = std::max<std::size_t>(1, std::min(threads, tasks.size()));
    if (threads == 1) {
        for (std::size_t t = 0; t < tasks.size(); ++t) eval_one(t);
        return out;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t t = w; t < tasks.size(); t += threads) eval_one(t);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (std::thread& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

ExperimentResult run_sequence(const std::vector<TaskDataset>& tasks, const TrainConfig& config) {
    validate(config);
    if (tasks.size() < 2) throw ConfigError("run_sequence: need at least two tasks (pre-training plus one more)");
    validate_sequence(tasks);
    const TaskSchema& schema = tasks.front().schema;

    std::vector<std::size_t> sizes{schema.feature_dim};
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(schema.output_dim);
    Rng init_rng = make_rng(config.seed, Stream::Init);
    ModelParams model = init_mlp(sizes, config.activation, schema.head, init_rng);

    // Pre-training is the shared starting point of every strategy.
    model = train_iid(std::move(model), tasks[0].train, config.pretrain_iterations, config,
                      make_rng(config.seed, Stream::Batches, 0), nullptr, "pre-training");
    const ModelParams pretrained = model;

    ExperimentResult result;
    result.strategy = config.strategy;
    result.seed = config.seed;
    result.loss_matrix.push_back(evaluate_tasks(model, tasks, config.eval_threads));

    MemoryStore store;
    store.add_task(tasks[0].train);
    std::vector<Example> seen = tasks[0].train;

    for (std::size_t t = 1; t < tasks.size(); ++t) {
        const TaskDataset& task = tasks[t];
        TaskReport report;
        if (config.strategy == StrategyKind::Oracle) {
            seen.insert(seen.end(), task.train.begin(), task.train.end());
            const CostLedger start = result.ledger;
            const std::size_t iters = config.iterations_per_task * (t + 1);
            model = train_iid(pretrained, seen, iters, config,
                              make_rng(config.seed, Stream::Oracle, static_cast<std::uint32_t>(t)), &result.ledger,
                              task_context(config, task.task_id));
            report.task_id = task.task_id;
            report.iterations = iters;
            report.ledger_delta = result.ledger - start;
        } else {
            BaselineSnapshot snap = snapshot_at_task_boundary(model);
            TaskOutcome outcome = train_task(std::move(model), store, snap, task, config, result.ledger);
            model = std::move(outcome.model);
            report = std::move(outcome.report);
        }
        report.test_losses = evaluate_tasks(model, tasks, config.eval_threads);
        result.loss_matrix.push_back(report.test_losses);
        result.task_reports.push_back(std::move(report));
        store.add_task(task.train);
    }

    result.final_loss_raw = final_loss_raw(result.loss_matrix);
    result.forgetting = forgetting_raw(result.loss_matrix);
    return result;
}

}  // namespace amr
