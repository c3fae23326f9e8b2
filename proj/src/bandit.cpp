#include "amr/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amr/errors.hpp"

namespace amr {

BanditState init_bandit(std::size_t num_clusters, double beta, double temperature) {
    if (num_clusters == 0) throw ConfigError("init_bandit: need at least one cluster");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("init_bandit: beta must lie in (0, 1]");
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw ConfigError("init_bandit: temperature must be positive and finite");
    return BanditState{std::vector<double>(num_clusters, 0.0), beta, temperature, 0};
}

BanditState update_means(BanditState state, const std::vector<double>& probe_means) {
    if (probe_means.size() != state.mu.size())
        throw UsageError("update_means: got " + std::to_string(probe_means.size()) + " probe means for " +
                         std::to_string(state.mu.size()) + " clusters");
    for (std::size_t i = 0; i < probe_means.size(); ++i) {
        if (!std::isfinite(probe_means[i])) throw NumericError("update_means: non-finite probe mean");
        state.mu[i] = state.beta * probe_means[i] + (1.0 - state.beta) * state.mu[i];
    }
    ++state.iteration;
    return state;
}

std::vector<double> boltzmann_distribution(const BanditState& state) {
    if (state.mu.empty()) throw UsageError("boltzmann_distribution: no clusters");
    const double top = *std::max_element(state.mu.begin(), state.mu.end());
    std::vector<double> p(state.mu.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp((state.mu[i] - top) / state.temperature);
    const double z = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= z;
    return p;
}

std::vector<double> probe_clusters(const ModelParams& model, BaselineSnapshot& snap, const MemoryStore& store,
                                   std::size_t probes_per_cluster, Rng& rng, CostLedger* ledger) {
    std::vector<double> means;
    means.reserve(store.num_clusters());
    for (const Cluster& c : store.clusters())
        means.push_back(mean_cluster_forgetting(model, snap, c, probes_per_cluster, rng, ledger));
    return means;
}

namespace {

ReplayBuffer fill_buffer(const std::vector<double>& probs, const MemoryStore& store, std::size_t m, Rng& rng) {
    std::discrete_distribution<int> pick_cluster(probs.begin(), probs.end());
    ReplayBuffer buffer;
    buffer.examples.reserve(m);
    buffer.source_clusters.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const int c = pick_cluster(rng);
        buffer.examples.push_back(sample_from_cluster(store.cluster(static_cast<std::size_t>(c)), 1, rng).front());
        buffer.source_clusters.push_back(c);
    }
    return buffer;
}

}  // namespace

ReplayBuffer sample_replay_buffer(const BanditState& state, const MemoryStore& store, std::size_t m, Rng& rng) {
    if (m == 0) throw UsageError("sample_replay_buffer: buffer size must be at least 1");
    if (store.empty()) throw UsageError("sample_replay_buffer: memory store is empty");
    if (state.num_arms() != store.num_clusters())
        throw UsageError("sample_replay_buffer: bandit has " + std::to_string(state.num_arms()) +
                         " arms but store has " + std::to_string(store.num_clusters()) + " clusters");
    return fill_buffer(boltzmann_distribution(state), store, m, rng);
}

ReplayBuffer sample_uniform_cluster_buffer(const MemoryStore& store, std::size_t m, Rng& rng) {
    if (m == 0) throw UsageError("sample_uniform_cluster_buffer: buffer size must be at least 1");
    if (store.empty()) throw UsageError("sample_uniform_cluster_buffer: memory store is empty");
    return fill_buffer(std::vector<double>(store.num_clusters(), 1.0), store, m, rng);
}

double regret_diagnostic(const ModelParams& model, BaselineSnapshot& snap, const MemoryStore& store,
                         const ReplayBuffer& buffer) {
    struct Scored {
        double value;
        std::int64_t id;
    };
    std::vector<Scored> all;
    all.reserve(store.size());
    for (const Cluster& c : store.clusters())
        for (const Example& ex : c.examples) all.push_back({forgetting(model, snap, ex), ex.example_id});

    const std::size_t m = std::min(buffer.size(), all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end(),
                      [](const Scored& a, const Scored& b) { return a.value != b.value ? a.value > b.value : a.id < b.id; });
    double best = 0.0;
    for (std::size_t i = 0; i < m; ++i) best += all[i].value;

    double chosen = 0.0;
    for (const Example& ex : buffer.examples) chosen += forgetting(model, snap, ex);
    return best - chosen;
}

}  // namespace amr
