#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>

#include "amr/cost_ledger.hpp"
#include "amr/memory_store.hpp"
#include "amr/model.hpp"

namespace amr {

// Parameters frozen at the last task boundary plus a lazily filled cache of
// each stored example's loss under them.
class BaselineSnapshot {
public:
    explicit BaselineSnapshot(ModelParams frozen) : frozen_(std::move(frozen)) {}

    const ModelParams& frozen_params() const { return frozen_; }

    // Loss under the frozen parameters. Computed once per example and cached;
    // a cache miss costs one forward pass on `ledger` when given.
    double baseline_loss(const Example& example, CostLedger* ledger = nullptr);

    bool is_cached(std::int64_t example_id) const { return cache_.count(example_id) != 0; }
    std::size_t cache_size() const { return cache_.size(); }

private:
    ModelParams frozen_;
    std::unordered_map<std::int64_t, double> cache_;
};

BaselineSnapshot snapshot_at_task_boundary(const ModelParams& model);

// Current loss minus baseline loss; positive when the example got worse.
// Charges the current forward pass (and a baseline miss) to `ledger`.
double forgetting(const ModelParams& model, BaselineSnapshot& snap, const Example& example,
                  CostLedger* ledger = nullptr);

// Mean forgetting over n_probe uniform draws (with replacement) from the cluster.
double mean_cluster_forgetting(const ModelParams& model, BaselineSnapshot& snap, const Cluster& cluster,
                               std::size_t n_probe, Rng& rng, CostLedger* ledger = nullptr);

// Mean forgetting over a batch together with its parameter gradient. The
// baseline term is constant in the parameters, so the gradient is the loss
// gradient.
LossAndGrad forgetting_backward(const ModelParams& model, BaselineSnapshot& snap, std::span<const Example> batch);

}  // namespace amr
