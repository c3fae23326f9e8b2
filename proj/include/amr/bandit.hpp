#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "amr/cost_ledger.hpp"
#include "amr/forgetting.hpp"
#include "amr/memory_store.hpp"

namespace amr {

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr double kDefaultBeta = 0.01;

// Non-stationary K-armed bandit over the memory clusters. Each arm's reward
// is the forgetting of an example drawn from that cluster.
struct BanditState {
    std::vector<double> mu;  // moving-average forgetting per cluster
    double beta = kDefaultBeta;
    double temperature = kDefaultTemperature;
    std::uint64_t iteration = 0;

    std::size_t num_arms() const { return mu.size(); }
};

struct ReplayBuffer {
    std::vector<Example> examples;
    std::vector<int> source_clusters;

    std::size_t size() const { return examples.size(); }
};

BanditState init_bandit(std::size_t num_clusters, double beta = kDefaultBeta, double temperature = kDefaultTemperature);

// mu_i <- beta * probe_mean_i + (1 - beta) * mu_i
BanditState update_means(BanditState state, const std::vector<double>& probe_means);

// Tempered softmax exp(mu_i / t) / Z, evaluated with the max subtracted.
std::vector<double> boltzmann_distribution(const BanditState& state);

// One probe mean per cluster, in cluster order. Probe forward passes are
// charged to ledger->selecting_passes.
std::vector<double> probe_clusters(const ModelParams& model, BaselineSnapshot& snap, const MemoryStore& store,
                                   std::size_t probes_per_cluster, Rng& rng, CostLedger* ledger = nullptr);

// m categorical cluster draws from the Boltzmann distribution, then one
// uniform example from each drawn cluster.
ReplayBuffer sample_replay_buffer(const BanditState& state, const MemoryStore& store, std::size_t m, Rng& rng);

// Same shape of buffer with clusters drawn uniformly; the reference point
// the bandit is compared against.
ReplayBuffer sample_uniform_cluster_buffer(const MemoryStore& store, std::size_t m, Rng& rng);

// Total forgetting of the |M| most-forgotten stored examples minus that of
// the buffer. Evaluates every stored example, so it is a diagnostic for small
// stores only. Ties among equal forgetting values go to the lower example_id.
double regret_diagnostic(const ModelParams& model, BaselineSnapshot& snap, const MemoryStore& store,
                         const ReplayBuffer& buffer);

}  // namespace amr
