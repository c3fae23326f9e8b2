#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amr/rng.hpp"

namespace amr {

// Row-major dense matrix holding one weight block.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool operator==(const DenseMatrix&) const = default;
};

enum class Activation { Tanh, Relu };
enum class Head { Regression, Classification };

std::string to_string(Activation a);
std::string to_string(Head h);
Activation parse_activation(const std::string& name);
Head parse_head(const std::string& name);

// Affine map: out = weight * in + bias. weight is (out_dim x in_dim).
struct Layer {
    DenseMatrix weight;
    std::vector<double> bias;

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }
    bool operator==(const Layer&) const = default;
};

// The trainable parameters. Hidden layers apply `activation`; the last layer
// is always linear and its outputs are interpreted by `head`.
struct ModelParams {
    std::vector<Layer> layers;
    Activation activation = Activation::Tanh;
    Head head = Head::Regression;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
    bool operator==(const ModelParams&) const = default;
};

// Same layout as ModelParams::layers.
struct Gradients {
    std::vector<Layer> layers;
};

struct Example {
    std::int64_t example_id = 0;
    int task_id = 0;
    std::vector<double> features;
    std::vector<double> target;  // regression head
    std::size_t label = 0;       // classification head

    bool operator==(const Example&) const = default;
};

struct LossAndGrad {
    double mean_loss = 0.0;
    Gradients grads;
};

// Throws ConfigError unless dimensions chain and every value is finite.
void validate(const ModelParams& model);

// Builds an MLP with layer sizes {in, h1, ..., out}; weights and biases are
// drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
ModelParams init_mlp(const std::vector<std::size_t>& sizes, Activation activation, Head head, Rng& rng);

std::vector<double> forward(const ModelParams& model, std::span<const double> features);

// MSE averaged over output dims, or softmax cross-entropy of the logits.
double per_example_loss(const ModelParams& model, const Example& example);

// Gradient of (1/N) * sum_i weight_i * loss_i. With no weights every example
// counts once.
LossAndGrad backward(const ModelParams& model, std::span<const Example> batch);
LossAndGrad backward(const ModelParams& model, std::span<const Example> batch, std::span<const double> weights);

ModelParams sgd_step(const ModelParams& model, const Gradients& grads, double lr);

Gradients zeros_like(const ModelParams& model);
std::size_t parameter_count(const ModelParams& model);

// Flat views used by gradient checks; order is layer by layer, weights
// (row-major) then bias.
std::vector<double> flatten(const ModelParams& model);
std::vector<double> flatten(const Gradients& grads);
ModelParams with_parameters(const ModelParams& model, std::span<const double> flat);

}  // namespace amr
