#pragma once

#include <cstddef>
#include <vector>

#include "amr/model.hpp"

namespace amr {

struct TaskSchema {
    std::size_t feature_dim = 0;
    Head head = Head::Regression;
    // Regression: number of target columns. Classification: number of classes.
    std::size_t output_dim = 1;

    bool operator==(const TaskSchema&) const = default;
};

struct TaskDataset {
    int task_id = 0;
    std::vector<Example> train;
    std::vector<Example> test;
    TaskSchema schema;

    bool operator==(const TaskDataset&) const = default;
};

// Throws ConfigError unless every task matches the first task's schema,
// task ids are dense from 0, every example matches its schema, test sets are
// non-empty and example ids are unique across the sequence.
void validate_sequence(const std::vector<TaskDataset>& tasks);

}  // namespace amr
