#pragma once

#include <cstddef>
#include <vector>

#include "amr/model.hpp"
#include "amr/rng.hpp"

namespace amr {

// All stored examples of one past task.
struct Cluster {
    int cluster_id = 0;
    std::vector<Example> examples;
};

// Full memory of every past task, one cluster per task. Nothing is evicted.
class MemoryStore {
public:
    // Appends task_data as a new cluster. Cluster ids equal task ids, so
    // tasks arrive in order 0, 1, 2, ...
    void add_task(std::vector<Example> task_data);

    std::size_t num_clusters() const { return clusters_.size(); }
    std::size_t size() const { return total_; }
    bool empty() const { return clusters_.empty(); }
    const Cluster& cluster(std::size_t i) const { return clusters_.at(i); }
    const std::vector<Cluster>& clusters() const { return clusters_; }

private:
    std::vector<Cluster> clusters_;
    std::vector<int> task_ids_;
    std::size_t total_ = 0;
};

// n uniform draws with replacement from one cluster.
std::vector<Example> sample_from_cluster(const Cluster& cluster, std::size_t n, Rng& rng);

// n draws with replacement, every stored example equally likely.
std::vector<Example> sample_iid_past(const MemoryStore& store, std::size_t n, Rng& rng);

// n draws with replacement: a uniformly chosen cluster, then a uniform
// example inside it.
std::vector<Example> sample_task_balanced_past(const MemoryStore& store, std::size_t n, Rng& rng);

}  // namespace amr
