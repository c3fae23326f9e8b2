#include "amr/memory_store.hpp"

#include <algorithm>
#include <unordered_set>

#include "amr/errors.hpp"

namespace amr {

void MemoryStore::add_task(std::vector<Example> task_data) {
    if (task_data.empty()) throw UsageError("add_task: task has no examples");
    const int task_id = task_data.front().task_id;
    if (std::any_of(task_data.begin(), task_data.end(), [&](const Example& e) { return e.task_id != task_id; }))
        throw UsageError("add_task: examples carry mixed task ids");
    if (std::find(task_ids_.begin(), task_ids_.end(), task_id) != task_ids_.end())
        throw UsageError("add_task: task " + std::to_string(task_id) + " is already stored");
    if (task_id != static_cast<int>(clusters_.size()))
        throw UsageError("add_task: task " + std::to_string(task_id) + " would become cluster " +
                         std::to_string(clusters_.size()) + "; tasks must be stored in order");

    std::unordered_set<std::int64_t> seen;
    for (const Example& e : task_data)
        if (!seen.insert(e.example_id).second)
            throw UsageError("add_task: duplicate example_id " + std::to_string(e.example_id));
    for (const Cluster& c : clusters_)
        for (const Example& e : c.examples)
            if (seen.count(e.example_id))
                throw UsageError("add_task: example_id " + std::to_string(e.example_id) + " already stored");

    total_ += task_data.size();
    task_ids_.push_back(task_id);
    clusters_.push_back(Cluster{static_cast<int>(clusters_.size()), std::move(task_data)});
}

std::vector<Example> sample_from_cluster(const Cluster& cluster, std::size_t n, Rng& rng) {
    if (n == 0) throw UsageError("sample_from_cluster: n must be at least 1");
    if (cluster.examples.empty()) throw std::logic_error("sample_from_cluster: empty cluster");
    std::uniform_int_distribution<std::size_t> pick(0, cluster.examples.size() - 1);
    std::vector<Example> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(cluster.examples[pick(rng)]);
    return out;
}

std::vector<Example> sample_iid_past(const MemoryStore& store, std::size_t n, Rng& rng) {
    if (store.empty()) throw UsageError("sample_iid_past: memory store is empty");
    if (n == 0) throw UsageError("sample_iid_past: n must be at least 1");
    std::uniform_int_distribution<std::size_t> pick(0, store.size() - 1);
    std::vector<Example> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t idx = pick(rng);
        for (const Cluster& c : store.clusters()) {
            if (idx < c.examples.size()) {
                out.push_back(c.examples[idx]);
                break;
            }
            idx -= c.examples.size();
        }
    }
    return out;
}

std::vector<Example> sample_task_balanced_past(const MemoryStore& store, std::size_t n, Rng& rng) {
    if (store.empty()) throw UsageError("sample_task_balanced_past: memory store is empty");
    if (n == 0) throw UsageError("sample_task_balanced_past: n must be at least 1");
    std::uniform_int_distribution<std::size_t> pick_cluster(0, store.num_clusters() - 1);
    std::vector<Example> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Cluster& c = store.cluster(pick_cluster(rng));
        std::uniform_int_distribution<std::size_t> pick(0, c.examples.size() - 1);
        out.push_back(c.examples[pick(rng)]);
    }
    return out;
}

}  // namespace amr
