#include "amr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "amr/errors.hpp"

namespace amr {

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string pct(double v) { return fmt("%.6f", v); }
// Shortest text that reads back to the same double.
std::string raw(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

nlohmann::ordered_json ledger_json(const CostLedger& l) {
    return {{"selecting_passes", l.selecting_passes},
            {"training_passes", l.training_passes},
            {"total_passes", l.total()}};
}

TrainConfig config_for(const RunConfig& config, StrategyKind s, std::uint64_t seed) {
    TrainConfig t = config.train;
    t.strategy = s;
    t.seed = seed;
    return t;
}

}  // namespace

std::vector<ExperimentResult> execute_runs(const RunConfig& config,
                                           const std::vector<std::pair<StrategyKind, std::uint64_t>>& plan) {
    for (const auto& [s, seed] : plan) validate(config_for(config, s, seed));

    // Datasets are generated once per seed, up front and in order.
    std::map<std::uint64_t, std::vector<TaskDataset>> datasets;
    for (const auto& [_, seed] : plan)
        if (!datasets.count(seed)) datasets.emplace(seed, materialize_dataset(config.dataset, seed));

    std::vector<ExperimentResult> results(plan.size());
    std::vector<std::exception_ptr> errors(plan.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < plan.size(); i = next++) {
            try {
                const auto& [s, seed] = plan[i];
                results[i] = run_sequence(datasets.at(seed), config_for(config, s, seed));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(config.jobs, plan.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

NormalizedMetrics normalize_run(const ExperimentResult& run, const ExperimentResult& oracle,
                                const ExperimentResult& base) {
    NormalizedMetrics m;
    m.final_loss_pct = normalize(run.final_loss_raw, oracle.final_loss_raw, base.final_loss_raw);
    m.forgetting_pct = run.strategy == StrategyKind::Oracle
                           ? 0.0
                           : normalize_forgetting(run.forgetting.value, oracle.final_loss_raw, base.final_loss_raw);
    m.time = normalize_time(run.ledger, oracle.ledger);
    return m;
}

Comparison compare_strategies(const RunConfig& config, const std::vector<StrategyKind>& strategies) {
    std::vector<StrategyKind> order;
    for (StrategyKind s : kAllStrategies)
        if (s == StrategyKind::Oracle || s == StrategyKind::Base ||
            std::find(strategies.begin(), strategies.end(), s) != strategies.end())
            order.push_back(s);

    std::vector<std::pair<StrategyKind, std::uint64_t>> plan;
    for (StrategyKind s : order)
        for (std::uint64_t seed : config.seeds) plan.emplace_back(s, seed);
    std::vector<ExperimentResult> results = execute_runs(config, plan);

    const std::size_t n_seeds = config.seeds.size();
    auto at = [&](std::size_t strategy_idx, std::size_t seed_idx) -> ExperimentResult& {
        return results[strategy_idx * n_seeds + seed_idx];
    };

    Comparison cmp;
    for (std::size_t si = 0; si < order.size(); ++si) {
        ComparisonRow row;
        row.strategy = order[si];
        row.n_seeds = n_seeds;
        for (std::size_t k = 0; k < n_seeds; ++k) {
            ExperimentResult& r = at(si, k);
            const NormalizedMetrics m = normalize_run(r, at(0, k), at(1, k));
            row.mean.final_loss_pct += m.final_loss_pct;
            row.mean.forgetting_pct += m.forgetting_pct;
            row.mean.time.selecting += m.time.selecting;
            row.mean.time.training += m.time.training;
            row.final_loss_raw += r.final_loss_raw;
            row.forgetting_raw += r.forgetting.value;
            row.selecting_passes += static_cast<double>(r.ledger.selecting_passes);
            row.training_passes += static_cast<double>(r.ledger.training_passes);
            cmp.runs.push_back(StrategyRun{std::move(r), m});
        }
        const auto n = static_cast<double>(n_seeds);
        row.mean.final_loss_pct /= n;
        row.mean.forgetting_pct /= n;
        row.mean.time.selecting /= n;
        row.mean.time.training /= n;
        row.mean.time.total = row.mean.time.selecting + row.mean.time.training;
        row.final_loss_raw /= n;
        row.forgetting_raw /= n;
        row.selecting_passes /= n;
        row.training_passes /= n;
        cmp.rows.push_back(row);
    }
    return cmp;
}

nlohmann::ordered_json result_to_json(const StrategyRun& run, const RunConfig& config) {
    const ExperimentResult& r = run.result;
    RunConfig embedded = config;
    embedded.train.strategy = r.strategy;
    embedded.seeds = {r.seed};
    nlohmann::ordered_json cfg = to_json(embedded);
    // Execution knobs that cannot change results.
    cfg.erase("output_dir");
    cfg.erase("jobs");
    cfg.erase("eval_threads");

    nlohmann::ordered_json j;
    j["schema_version"] = kResultSchemaVersion;
    j["strategy"] = to_string(r.strategy);
    j["seed"] = r.seed;
    j["config"] = cfg;
    j["loss_matrix"] = r.loss_matrix;
    j["final_loss_raw"] = r.final_loss_raw;
    j["forgetting_raw"] = r.forgetting.value;
    j["forgetting_defined"] = r.forgetting.defined;
    j["ledger"] = ledger_json(r.ledger);
    if (run.normalized) {
        const NormalizedMetrics& m = *run.normalized;
        j["normalized"] = {{"final_loss_pct", m.final_loss_pct},
                           {"forgetting_pct", m.forgetting_pct},
                           {"time_total_pct", m.time.total},
                           {"time_selecting_pct", m.time.selecting},
                           {"time_training_pct", m.time.training}};
    } else {
        j["normalized"] = nullptr;
    }
    nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
    for (const TaskReport& t : r.task_reports) {
        nlohmann::ordered_json tj;
        tj["task_id"] = t.task_id;
        tj["iterations"] = t.iterations;
        tj["test_losses"] = t.test_losses;
        tj["ledger_delta"] = ledger_json(t.ledger_delta);
        tj["replay_cluster_histogram"] = t.replay_cluster_histogram;
        if (!t.mu_trajectory.empty()) tj["mu_trajectory"] = t.mu_trajectory;
        tasks.push_back(std::move(tj));
    }
    j["tasks"] = std::move(tasks);
    return j;
}

std::string comparison_csv(const Comparison& cmp) {
    std::ostringstream out;
    out << "schema_version,strategy,n_seeds,final_loss_pct,forgetting_pct,time_total_pct,time_selecting_pct,"
           "time_training_pct,final_loss_raw,forgetting_raw,selecting_passes,training_passes,total_passes\n";
    for (const ComparisonRow& row : cmp.rows) {
        out << kResultSchemaVersion << ',' << to_string(row.strategy) << ',' << row.n_seeds << ','
            << pct(row.mean.final_loss_pct) << ',' << pct(row.mean.forgetting_pct) << ',' << pct(row.mean.time.total)
            << ',' << pct(row.mean.time.selecting) << ',' << pct(row.mean.time.training) << ','
            << raw(row.final_loss_raw) << ',' << raw(row.forgetting_raw) << ',' << raw(row.selecting_passes) << ','
            << raw(row.training_passes) << ',' << raw(row.selecting_passes + row.training_passes) << '\n';
    }
    return out.str();
}

std::string per_seed_csv(const Comparison& cmp) {
    std::ostringstream out;
    out << "schema_version,strategy,seed,final_loss_pct,forgetting_pct,time_total_pct,time_selecting_pct,"
           "time_training_pct,final_loss_raw,forgetting_raw,selecting_passes,training_passes,total_passes\n";
    for (const StrategyRun& run : cmp.runs) {
        const ExperimentResult& r = run.result;
        const NormalizedMetrics& m = *run.normalized;
        out << kResultSchemaVersion << ',' << to_string(r.strategy) << ',' << r.seed << ',' << pct(m.final_loss_pct)
            << ',' << pct(m.forgetting_pct) << ',' << pct(m.time.total) << ',' << pct(m.time.selecting) << ','
            << pct(m.time.training) << ',' << raw(r.final_loss_raw) << ',' << raw(r.forgetting.value) << ','
            << r.ledger.selecting_passes << ',' << r.ledger.training_passes << ',' << r.ledger.total() << '\n';
    }
    return out.str();
}

std::string format_table(const Comparison& cmp) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-28s | %10s %10s | %9s %9s %9s\n", "Approach", "Final Loss", "Forgetting",
                  "Total", "Selecting", "Training");
    out << line << std::string(86, '-') << '\n';
    for (const ComparisonRow& row : cmp.rows) {
        std::snprintf(line, sizeof line, "%-28s | %9.2f%% %9.2f%% | %8.2f%% %8.2f%% %8.2f%%\n",
                      display_name(row.strategy).c_str(), row.mean.final_loss_pct, row.mean.forgetting_pct,
                      row.mean.time.total, row.mean.time.selecting, row.mean.time.training);
        out << line;
    }
    return out.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw LoadError(tmp.string(), 0, "cannot open for writing");
        out << content;
        if (!out) throw LoadError(tmp.string(), 0, "write failed");
    }
    std::filesystem::rename(tmp, path);
}

namespace {

std::string result_file_name(const ExperimentResult& r) {
    return to_string(r.strategy) + "_seed" + std::to_string(r.seed) + ".json";
}

}  // namespace

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const NumericError& e) {
        err << "numeric abort: " << e.what() << '\n';
        return kExitNumericAbort;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const LoadError& e) {
        err << "load error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            const StrategyKind s = config.train.strategy;
            std::vector<std::pair<StrategyKind, std::uint64_t>> plan;
            for (std::uint64_t seed : config.seeds) plan.emplace_back(s, seed);
            std::vector<ExperimentResult> results = execute_runs(config, plan);

            const auto dir = config.output_dir / "run";
            std::ostringstream summary;
            summary << "schema_version,strategy,seed,final_loss_raw,forgetting_raw,selecting_passes,training_passes,"
                       "total_passes\n";
            for (ExperimentResult& r : results) {
                summary << kResultSchemaVersion << ',' << to_string(r.strategy) << ',' << r.seed << ','
                        << raw(r.final_loss_raw) << ',' << raw(r.forgetting.value) << ',' << r.ledger.selecting_passes
                        << ',' << r.ledger.training_passes << ',' << r.ledger.total() << '\n';
                const std::string name = result_file_name(r);
                const StrategyRun run{std::move(r), std::nullopt};
                write_atomic(dir / name, result_to_json(run, config).dump(2) + "\n");
                out << "wrote " << (dir / name).string() << '\n';
            }
            write_atomic(config.output_dir / "run_summary.csv", summary.str());
            return static_cast<int>(kExitOk);
        },
        err);
}

int cmd_compare(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            const Comparison cmp = compare_strategies(config);
            const auto dir = config.output_dir / "compare";
            for (const StrategyRun& run : cmp.runs)
                write_atomic(dir / result_file_name(run.result), result_to_json(run, config).dump(2) + "\n");
            write_atomic(config.output_dir / "compare_table.csv", comparison_csv(cmp));
            write_atomic(config.output_dir / "compare_per_seed.csv", per_seed_csv(cmp));
            out << format_table(cmp);
            out << "wrote " << (config.output_dir / "compare_table.csv").string() << '\n';
            return static_cast<int>(kExitOk);
        },
        err);
}

int cmd_sweep(const RunConfig& config, const SweepGrid& grid, std::ostream& out, std::ostream& err) {
    return guarded(
        [&] {
            const auto points = grid.points();
            // Reject every bad grid point before any training starts.
            for (const auto& point : points) {
                TrainConfig t = config.train;
                t.strategy = StrategyKind::Adaptive;
                for (const auto& [key, value] : point) set_sweep_param(t, key, value);
            }

            std::ostringstream csv;
            csv << "schema_version,point,replay_fraction,probes_per_cluster,probe_every,temperature,beta,strategy,"
                   "seed,final_loss_pct,forgetting_pct,time_total_pct,time_selecting_pct,time_training_pct,"
                   "final_loss_raw,forgetting_raw,selecting_passes,training_passes,total_passes\n";
            for (std::size_t p = 0; p < points.size(); ++p) {
                RunConfig point_config = config;
                for (const auto& [key, value] : points[p]) set_sweep_param(point_config.train, key, value);
                const Comparison cmp = compare_strategies(point_config);
                const TrainConfig& t = point_config.train;
                for (const StrategyRun& run : cmp.runs) {
                    const ExperimentResult& r = run.result;
                    const NormalizedMetrics& m = *run.normalized;
                    csv << kResultSchemaVersion << ',' << p << ',' << raw(t.replay_fraction) << ','
                        << t.probes_per_cluster << ',' << t.probe_every << ',' << raw(t.temperature) << ','
                        << raw(t.beta) << ',' << to_string(r.strategy) << ',' << r.seed << ','
                        << pct(m.final_loss_pct) << ',' << pct(m.forgetting_pct) << ',' << pct(m.time.total) << ','
                        << pct(m.time.selecting) << ',' << pct(m.time.training) << ',' << raw(r.final_loss_raw)
                        << ',' << raw(r.forgetting.value) << ',' << r.ledger.selecting_passes << ','
                        << r.ledger.training_passes << ',' << r.ledger.total() << '\n';
                }
                out << "point " << p << "/" << points.size() << " done\n";
            }
            write_atomic(config.output_dir / "sweep.csv", csv.str());
            out << "wrote " << (config.output_dir / "sweep.csv").string() << '\n';
            return static_cast<int>(kExitOk);
        },
        err);
}

}  // namespace amr
