#include "amr/forgetting.hpp"

#include "amr/errors.hpp"

namespace amr {

double BaselineSnapshot::baseline_loss(const Example& example, CostLedger* ledger) {
    if (auto it = cache_.find(example.example_id); it != cache_.end()) return it->second;
    const double loss = per_example_loss(frozen_, example);
    if (ledger) ledger->charge_selection_forward();
    cache_.emplace(example.example_id, loss);
    return loss;
}

BaselineSnapshot snapshot_at_task_boundary(const ModelParams& model) { return BaselineSnapshot(model); }

double forgetting(const ModelParams& model, BaselineSnapshot& snap, const Example& example, CostLedger* ledger) {
    const double current = per_example_loss(model, example);
    if (ledger) ledger->charge_selection_forward();
    return current - snap.baseline_loss(example, ledger);
}

double mean_cluster_forgetting(const ModelParams& model, BaselineSnapshot& snap, const Cluster& cluster,
                               std::size_t n_probe, Rng& rng, CostLedger* ledger) {
    if (n_probe == 0) throw UsageError("mean_cluster_forgetting: n_probe must be at least 1");
    double sum = 0.0;
    for (const Example& ex : sample_from_cluster(cluster, n_probe, rng)) sum += forgetting(model, snap, ex, ledger);
    return sum / static_cast<double>(n_probe);
}

LossAndGrad forgetting_backward(const ModelParams& model, BaselineSnapshot& snap, std::span<const Example> batch) {
    LossAndGrad out = backward(model, batch);
    double baseline = 0.0;
    for (const Example& ex : batch) baseline += snap.baseline_loss(ex);
    out.mean_loss -= baseline / static_cast<double>(batch.size());
    return out;
}

}  // namespace amr
