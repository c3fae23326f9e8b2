// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "amr/bandit.hpp"
#include "amr/errors.hpp"
#include "amr/harness.hpp"
#include "stats.hpp"
#include "synthetic_store.hpp"

using namespace amr;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* spec, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, spec, a, b, c, d);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::vector<Example> random_batch(Rng& rng, std::size_t n, const ModelParams& m, std::int64_t first_id) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> cls(0, m.output_dim() - 1);
    std::vector<Example> batch(n);
    for (std::size_t i = 0; i < n; ++i) {
        batch[i].example_id = first_id + static_cast<std::int64_t>(i);
        for (std::size_t k = 0; k < m.input_dim(); ++k) batch[i].features.push_back(g(rng));
        if (m.head == Head::Regression)
            for (std::size_t k = 0; k < m.output_dim(); ++k) batch[i].target.push_back(g(rng));
        else
            batch[i].label = cls(rng);
    }
    return batch;
}

ModelParams random_mlp(Rng& rng) {
    std::uniform_int_distribution<std::size_t> dim(1, 5), depth(0, 2);
    const Head head = rng() % 2 ? Head::Classification : Head::Regression;
    const Activation act = rng() % 2 ? Activation::Relu : Activation::Tanh;
    std::vector<std::size_t> sizes{dim(rng)};
    for (std::size_t h = depth(rng); h > 0; --h) sizes.push_back(dim(rng));
    sizes.push_back(head == Head::Classification ? dim(rng) + 1 : dim(rng));
    return init_mlp(sizes, act, head, rng);
}

double mean_loss(const ModelParams& m, const std::vector<Example>& batch) {
    double s = 0.0;
    for (const Example& e : batch) s += per_example_loss(m, e);
    return s / static_cast<double>(batch.size());
}

Outcome gradient_oracle() {
    const auto start = Clock::now();
    Rng rng = make_rng(2024, Stream::Init);
    const double h = 1e-5;
    double worst = 0.0;
    std::size_t components = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const ModelParams m = random_mlp(rng);
        const auto batch = random_batch(rng, 1 + static_cast<std::size_t>(trial % 6), m, 0);
        const std::vector<double> analytic = flatten(backward(m, batch).grads);
        std::vector<double> theta = flatten(m);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double keep = theta[i];
            theta[i] = keep + h;
            const double up = mean_loss(with_parameters(m, theta), batch);
            theta[i] = keep - h;
            const double down = mean_loss(with_parameters(m, theta), batch);
            theta[i] = keep;
            const double numeric = (up - down) / (2 * h);
            // relative to the larger magnitude, floored so exact zeros compare absolutely
            const double rel = std::abs(numeric - analytic[i]) / std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
            worst = std::max(worst, rel);
            ++components;
        }
    }
    const double secs = seconds_since(start);
    return {worst < 1e-4 && secs < 10.0,
            fmt("%.0f components, worst rel. err %.2e, %.2f s", static_cast<double>(components), worst, secs)};
}

Outcome sampler_statistics() {
    Rng rng = make_rng(7, Stream::Probe);
    std::normal_distribution<double> g(0.0, 3.0);
    std::uniform_int_distribution<std::size_t> arms(1, 12);
    std::uniform_real_distribution<double> shift(-50.0, 50.0), temp(0.01, 2.0);
    double worst_sum = 0.0, worst_shift = 0.0;
    for (int i = 0; i < 1000; ++i) {
        BanditState s = init_bandit(arms(rng), 0.01, temp(rng));
        for (double& v : s.mu) v = g(rng);
        const auto p = boltzmann_distribution(s);
        worst_sum = std::max(worst_sum, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
        BanditState moved = s;
        const double c = shift(rng);
        for (double& v : moved.mu) v += c;
        const auto q = boltzmann_distribution(moved);
        for (std::size_t k = 0; k < p.size(); ++k) worst_shift = std::max(worst_shift, std::abs(p[k] - q[k]));
    }

    std::mt19937_64 gen(1);
    const MemoryStore store = synthetic::store({0.0, 0.0}, 0.1, 10, gen);
    BanditState s = init_bandit(2);
    s.mu = {0.0, s.temperature * std::log(3.0)};
    const auto p = boltzmann_distribution(s);
    Rng draw = make_rng(8, Stream::Replay);
    const std::size_t n = 100000;
    const ReplayBuffer b = sample_replay_buffer(s, store, n, draw);
    const auto hits = static_cast<std::size_t>(std::count(b.source_clusters.begin(), b.source_clusters.end(), 1));
    const bool forced = std::abs(p[0] - 0.25) < 1e-12 && std::abs(p[1] - 0.75) < 1e-12;
    const bool ok = worst_sum <= 1e-12 && worst_shift <= 1e-12 && forced && within_3sigma(hits, n, p[1]) &&
                    within_3sigma(n - hits, n, p[0]);
    return {ok, fmt("sum err %.1e, shift err %.1e, cluster-1 freq %.5f vs %.2f", worst_sum, worst_shift,
                    static_cast<double>(hits) / n, p[1])};
}

Outcome moving_average() {
    double worst = 0.0;
    for (double beta : {0.01, 0.1, 1.0}) {
        const double c = 0.8125;
        BanditState s = init_bandit(1, beta);
        for (int j = 1; j <= 1000; ++j) {
            s = update_means(s, {c});
            worst = std::max(worst, std::abs(s.mu[0] - c * (1.0 - std::pow(1.0 - beta, j))));
        }
    }
    return {worst <= 1e-10, fmt("worst abs. deviation %.2e", worst)};
}

// Whether a double within 4 ulps of f satisfies l - f - l_star == 0.
bool some_neighbour_fits(double l, double f, double l_star) {
    for (double dir : {-INFINITY, INFINITY}) {
        double c = f;
        for (int k = 0; k < 4; ++k) {
            c = std::nextafter(c, dir);
            if (l - c - l_star == 0.0) return true;
        }
    }
    return false;
}

Outcome additivity_identity() {
    Rng rng = make_rng(99, Stream::Init);
    std::size_t identity_fail = 0, exact_range_fail = 0, representable = 0, cache_fail = 0, grad_fail = 0;
    std::int64_t next_id = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const ModelParams frozen = random_mlp(rng);
        // the live model is the snapshot after a few SGD steps, as within a task
        ModelParams live = frozen;
        const std::size_t steps = 1 + rng() % 5;
        for (std::size_t k = 0; k < steps; ++k)
            live = sgd_step(live, backward(live, random_batch(rng, 4, live, 1'000'000)).grads, 0.05);
        BaselineSnapshot snap = snapshot_at_task_boundary(frozen);
        const auto batch = random_batch(rng, 3, live, next_id);
        next_id += 3;
        const Example& x = batch[0];

        const double l = per_example_loss(live, x);
        const double f = forgetting(live, snap, x);
        const double l_star = snap.baseline_loss(x);
        if (!(l - f - l_star == 0.0)) {
            ++identity_fail;
            // L - L* is exact when L*/2 <= L <= 2 L*; outside that range look
            // for any nearby double F that would satisfy the identity.
            if (l_star / 2 <= l && l <= 2 * l_star) ++exact_range_fail;
            representable += some_neighbour_fits(l, f, l_star);
        }
        if (!snap.is_cached(x.example_id) || !same_bits(l_star, per_example_loss(snap.frozen_params(), x)) ||
            !same_bits(snap.baseline_loss(x), l_star))
            ++cache_fail;

        const auto gf = flatten(forgetting_backward(live, snap, batch).grads);
        const auto gl = flatten(backward(live, batch).grads);
        if (gf.size() != gl.size() || !std::equal(gf.begin(), gf.end(), gl.begin(), same_bits)) ++grad_fail;
    }
    return {identity_fail == 0 && cache_fail == 0 && grad_fail == 0,
            "1000 triples: " + std::to_string(identity_fail) + " identity mismatches (" +
                std::to_string(exact_range_fail) + " with L*/2 <= L <= 2L*, " + std::to_string(representable) +
                " fixable by any F within 4 ulps), " + std::to_string(cache_fail) + " cache, " +
                std::to_string(grad_fail) + " gradient mismatches"};
}

RunConfig headline_config(const fs::path& out) {
    RunConfig c;
    c.dataset.kind = DatasetKind::RotatedRegression;
    c.dataset.rotated.num_tasks = 5;
    c.dataset.rotated.dim = 16;
    c.dataset.rotated.n_train = 2000;
    c.dataset.rotated.n_test = 500;
    c.train.batch_size = 128;
    c.train.replay_fraction = 0.5;
    c.train.temperature = 0.1;
    c.train.beta = 0.01;
    c.seeds = {0, 1, 2, 3, 4};
    c.output_dir = out;
    return c;
}

Outcome budget_invariants() {
    const RunConfig c = headline_config("unused");
    const auto tasks = materialize_dataset(c.dataset, 0);
    const std::uint64_t per_iter = 3 * c.train.batch_size;
    std::map<StrategyKind, ExperimentResult> runs;
    for (StrategyKind s : {StrategyKind::Naive, StrategyKind::StandardRehearsal, StrategyKind::Adaptive,
                           StrategyKind::AdaptiveZeroCost, StrategyKind::Oracle, StrategyKind::Base}) {
        TrainConfig t = c.train;
        t.strategy = s;
        runs[s] = run_sequence(tasks, t);
    }
    bool per_iteration = true;
    for (StrategyKind s : {StrategyKind::Naive, StrategyKind::StandardRehearsal, StrategyKind::Adaptive})
        for (const TaskReport& r : runs[s].task_reports)
            per_iteration = per_iteration && r.iterations == c.train.iterations_per_task &&
                            r.ledger_delta.training_passes == per_iter * r.iterations;
    const std::uint64_t naive = runs[StrategyKind::Naive].ledger.total();
    const std::uint64_t zero = runs[StrategyKind::AdaptiveZeroCost].ledger.total();
    const bool within = zero <= naive + per_iter;
    bool sums = true;
    for (const auto& [s, r] : runs) {
        CostLedger acc;
        for (const TaskReport& t : r.task_reports) acc += t.ledger_delta;
        sums = sums && r.ledger.selecting_passes + r.ledger.training_passes == r.ledger.total() && acc == r.ledger;
    }
    return {per_iteration && within && sums,
            std::string("3B per iteration ") + (per_iteration ? "holds" : "BROKEN") + "; zero-cost " +
                std::to_string(zero) + " vs naive " + std::to_string(naive) + " passes; ledger sums " +
                (sums ? "exact" : "BROKEN")};
}

// Brute-force M*: the |M| largest forgetting values of the whole store.
double brute_force_regret(const MemoryStore& store, const ReplayBuffer& buffer) {
    BaselineSnapshot snap(synthetic::frozen());
    std::vector<double> all;
    for (const Cluster& c : store.clusters())
        for (const Example& e : c.examples) all.push_back(forgetting(synthetic::live(), snap, e));
    std::sort(all.begin(), all.end(), std::greater<>());
    double best = 0.0, chosen = 0.0;
    for (std::size_t i = 0; i < buffer.size(); ++i) best += all[i];
    for (const Example& e : buffer.examples) chosen += forgetting(synthetic::live(), snap, e);
    return best - chosen;
}

Outcome bandit_beats_uniform() {
    const auto start = Clock::now();
    const std::size_t m = 8, buffers = 20;
    double bandit_sum = 0.0, uniform_sum = 0.0, max_oracle_gap = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 gen(seed);
        const MemoryStore store = synthetic::store({1.0, 0.1, 0.1, 0.1}, 0.05, 200, gen);
        BaselineSnapshot snap(synthetic::frozen());
        BanditState state = init_bandit(4, 0.01, 0.1);
        Rng probe = make_rng(seed, Stream::Probe), replay = make_rng(seed, Stream::Replay);
        for (int j = 0; j < 200; ++j) state = update_means(state, probe_clusters(synthetic::live(), snap, store, 2, probe));
        double bandit = 0.0, uniform = 0.0;
        for (std::size_t k = 0; k < buffers; ++k) {
            const ReplayBuffer b = sample_replay_buffer(state, store, m, replay);
            const ReplayBuffer u = sample_uniform_cluster_buffer(store, m, replay);
            const double rb = regret_diagnostic(synthetic::live(), snap, store, b);
            const double ru = regret_diagnostic(synthetic::live(), snap, store, u);
            max_oracle_gap = std::max({max_oracle_gap, std::abs(rb - brute_force_regret(store, b)),
                                       std::abs(ru - brute_force_regret(store, u))});
            bandit += rb;
            uniform += ru;
        }
        bandit_sum += bandit / buffers;
        uniform_sum += uniform / buffers;
    }
    const double secs = seconds_since(start);
    const double b = bandit_sum / 10, u = uniform_sum / 10;
    return {b < u && max_oracle_gap < 1e-9 && secs < 30.0,
            fmt("mean regret bandit %.4f vs uniform %.4f, oracle gap %.1e, %.2f s", b, u, max_oracle_gap, secs)};
}

struct Row {
    std::map<std::string, std::string> cells;
    double num(const std::string& k) const { return std::stod(cells.at(k)); }
};

std::map<std::string, Row> read_table(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) header.push_back(cell);
    }
    std::map<std::string, Row> rows;
    while (std::getline(in, line)) {
        Row r;
        std::stringstream ss(line);
        std::size_t i = 0;
        for (std::string cell; std::getline(ss, cell, ',') && i < header.size(); ++i) r.cells[header[i]] = cell;
        rows[r.cells["strategy"]] = r;
    }
    return rows;
}

Outcome headline_ordering(const fs::path& dir, double& seconds) {
    const auto start = Clock::now();
    std::ostringstream out, err;
    const int code = cmd_compare(headline_config(dir), out, err);
    seconds = seconds_since(start);
    if (code != kExitOk) return {false, "cmd_compare exited " + std::to_string(code) + ": " + err.str()};

    // seed means at full precision from the per-run result files
    auto mean_forgetting = [&](const std::string& strategy) {
        double sum = 0.0;
        for (int seed = 0; seed < 5; ++seed) {
            const auto j = nlohmann::json::parse(slurp(dir / "compare" / (strategy + "_seed" + std::to_string(seed) + ".json")));
            sum += j["normalized"]["forgetting_pct"].get<double>();
        }
        return sum / 5;
    };
    const double naive = mean_forgetting("naive"), sr = mean_forgetting("standard_rehearsal"),
                 ada = mean_forgetting("adaptive"), zero = mean_forgetting("adaptive_zero_cost");
    std::fputs(out.str().c_str(), stdout);
    const bool ok = ada <= sr && sr <= naive && ada < sr && zero <= sr && seconds < 600.0;
    return {ok, fmt("forgetting %% naive %.2f, rehearsal %.2f, adaptive %.2f, zero-cost %.2f", naive, sr, ada, zero) +
                    fmt(" (%.1f s)", seconds)};
}

Outcome anchor_rows(const fs::path& dir) {
    const auto rows = read_table(dir / "compare_table.csv");
    if (!rows.count("oracle") || !rows.count("base")) return {false, "compare_table.csv lacks anchor rows"};
    const Row& o = rows.at("oracle");
    const Row& b = rows.at("base");
    auto is = [](const Row& r, const char* k, const char* v) { return r.cells.at(k) == v; };
    const bool oracle = is(o, "final_loss_pct", "0.000000") && is(o, "forgetting_pct", "0.000000") &&
                        is(o, "time_total_pct", "100.000000") && is(o, "time_selecting_pct", "0.000000") &&
                        is(o, "time_training_pct", "100.000000");
    const bool base = is(b, "final_loss_pct", "100.000000") && is(b, "forgetting_pct", "0.000000") &&
                      is(b, "time_total_pct", "0.000000") && is(b, "time_selecting_pct", "0.000000") &&
                      is(b, "time_training_pct", "0.000000");
    // exact values, not just their rounding
    bool exact = true;
    for (int seed = 0; seed < 5; ++seed) {
        const auto oj = nlohmann::json::parse(slurp(dir / "compare" / ("oracle_seed" + std::to_string(seed) + ".json")));
        const auto bj = nlohmann::json::parse(slurp(dir / "compare" / ("base_seed" + std::to_string(seed) + ".json")));
        const auto& on = oj["normalized"];
        const auto& bn = bj["normalized"];
        exact = exact && on["final_loss_pct"] == 0.0 && on["forgetting_pct"] == 0.0 && on["time_total_pct"] == 100.0 &&
                on["time_selecting_pct"] == 0.0 && on["time_training_pct"] == 100.0 && bn["final_loss_pct"] == 100.0 &&
                bn["forgetting_pct"] == 0.0 && bn["time_total_pct"] == 0.0 && bn["time_selecting_pct"] == 0.0 &&
                bn["time_training_pct"] == 0.0;
    }
    return {oracle && base && exact, std::string("oracle row ") + (oracle ? "ok" : "WRONG") + ", base row " +
                                         (base ? "ok" : "WRONG") + ", per-seed values " + (exact ? "exact" : "INEXACT")};
}

std::vector<fs::path> aggregate_files(const fs::path& dir) {
    std::vector<fs::path> files{"compare_table.csv", "compare_per_seed.csv"};
    std::vector<fs::path> runs;
    for (const auto& e : fs::directory_iterator(dir / "compare")) runs.push_back(fs::path("compare") / e.path().filename());
    std::sort(runs.begin(), runs.end());
    files.insert(files.end(), runs.begin(), runs.end());
    return files;
}

Outcome determinism(const fs::path& first, const fs::path& root) {
    std::ostringstream out, err;
    RunConfig serial = headline_config(root / "serial_again");
    RunConfig parallel = headline_config(root / "parallel");
    parallel.jobs = 4;
    if (cmd_compare(serial, out, err) != kExitOk || cmd_compare(parallel, out, err) != kExitOk)
        return {false, "cmd_compare failed: " + err.str()};
    const auto files = aggregate_files(first);
    std::size_t serial_diff = 0, parallel_diff = 0;
    for (const fs::path& f : files) {
        const std::string a = slurp(first / f);
        serial_diff += a != slurp(serial.output_dir / f);
        parallel_diff += a != slurp(parallel.output_dir / f);
    }
    const bool same_listing = aggregate_files(serial.output_dir) == files && aggregate_files(parallel.output_dir) == files;
    return {serial_diff == 0 && parallel_diff == 0 && same_listing && files.size() == 32,
            fmt("%.0f files; serial rerun differs in %.0f, 4 jobs differ in %.0f", static_cast<double>(files.size()),
                static_cast<double>(serial_diff), static_cast<double>(parallel_diff))};
}

}  // namespace

int main() {
    const fs::path root = fs::temp_directory_path() / "amr_acceptance";
    fs::remove_all(root);

    int failures = 0;
    auto report = [&](int n, const char* name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    };

    report(1, "gradient oracle", gradient_oracle);
    report(2, "sampler statistics", sampler_statistics);
    report(3, "moving-average closed form", moving_average);
    report(4, "loss = forgetting + baseline", additivity_identity);
    report(5, "budget invariants", budget_invariants);
    report(6, "bandit beats uniform", bandit_beats_uniform);
    double headline_seconds = 0.0;
    bool headline_ran = false;
    report(7, "headline ordering", [&] {
        headline_ran = true;
        return headline_ordering(root / "serial", headline_seconds);
    });
    report(8, "anchor rows", [&] { return anchor_rows(root / "serial"); });
    report(9, "determinism", [&] { return determinism(root / "serial", root); });
    (void)headline_ran;

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
