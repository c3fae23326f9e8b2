#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amr/dataset.hpp"

namespace amr {

// Regression tasks sharing x ~ N(0, I). Task t's target is
// (R_t w) . x + noise, where R_t rotates the unit ground-truth direction w by
// t * rotation_degrees inside a fixed random plane containing w.
struct RotatedRegressionSpec {
    std::size_t num_tasks = 5;
    std::size_t n_train = 2000;
    std::size_t n_test = 500;
    std::size_t dim = 16;
    double rotation_degrees = 30.0;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
};

std::vector<TaskDataset> gen_rotated_regression(const RotatedRegressionSpec& spec);

// Gaussian-blob classification. Every task shares the class centres; task t
// sees the features through a fixed random permutation (identity for task 0,
// or for every task when identity_permutations is set).
struct PermutedClassificationSpec {
    std::size_t num_tasks = 5;
    std::size_t n_train = 2000;
    std::size_t n_test = 500;
    std::size_t dim = 16;
    std::size_t num_classes = 4;
    double class_separation = 6.0;  // minimum centre distance, in units of the blob sigma
    bool identity_permutations = false;
    std::uint64_t seed = 0;
};

std::vector<TaskDataset> gen_permuted_classification(const PermutedClassificationSpec& spec);

// Feature permutation applied to task t (position i of a transformed example
// holds original feature perm[i]).
std::vector<std::size_t> task_permutation(const PermutedClassificationSpec& spec, std::size_t task);

// Writes task<k>_train.csv / task<k>_test.csv plus manifest.json into dir and
// returns the manifest path.
std::filesystem::path write_task_files(const std::vector<TaskDataset>& tasks, const std::filesystem::path& dir);

// Reads a manifest and every CSV it names. Example ids are assigned in file
// order: task 0 train, task 0 test, task 1 train, ...
std::vector<TaskDataset> load_manifest(const std::filesystem::path& manifest_path);

// Single CSV in the task file layout.
std::vector<Example> read_task_csv(const std::filesystem::path& path, const TaskSchema& schema, int task_id,
                                   std::int64_t first_example_id);
void write_task_csv(const std::filesystem::path& path, const std::vector<Example>& examples,
                    const TaskSchema& schema);

}  // namespace amr
