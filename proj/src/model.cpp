#include "amr/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "amr/errors.hpp"

namespace amr {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

std::string to_string(Head h) { return h == Head::Regression ? "regression" : "classification"; }

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw ConfigError("unknown activation '" + name + "' (expected tanh or relu)");
}

Head parse_head(const std::string& name) {
    if (name == "regression") return Head::Regression;
    if (name == "classification") return Head::Classification;
    throw ConfigError("unknown head '" + name + "' (expected regression or classification)");
}

void validate(const ModelParams& model) {
    if (model.layers.empty()) throw ConfigError("model has no layers");
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        const Layer& layer = model.layers[k];
        if (layer.weight.data.size() != layer.weight.rows * layer.weight.cols)
            throw ConfigError("layer " + std::to_string(k) + ": weight storage does not match its shape");
        if (layer.bias.size() != layer.out_dim())
            throw ConfigError("layer " + std::to_string(k) + ": bias length does not match output dim");
        if (k > 0 && layer.in_dim() != model.layers[k - 1].out_dim())
            throw ConfigError("layer " + std::to_string(k) + ": input dim does not chain with previous layer");
        auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(layer.weight.data.begin(), layer.weight.data.end(), finite) ||
            !std::all_of(layer.bias.begin(), layer.bias.end(), finite))
            throw ConfigError("layer " + std::to_string(k) + ": non-finite parameter");
    }
}

ModelParams init_mlp(const std::vector<std::size_t>& sizes, Activation activation, Head head, Rng& rng) {
    if (sizes.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
    if (std::any_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 0; }))
        throw ConfigError("layer sizes must be positive");

    ModelParams model;
    model.activation = activation;
    model.head = head;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        const std::size_t fan_in = sizes[k];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Layer layer{DenseMatrix(sizes[k + 1], fan_in), std::vector<double>(sizes[k + 1])};
        for (double& w : layer.weight.data) w = dist(rng);
        for (double& b : layer.bias) b = dist(rng);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

namespace {

double activate(Activation a, double z) { return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0); }

// Derivative expressed through the activation output (tanh) or the input (relu).
double activate_grad(Activation a, double z, double out) {
    return a == Activation::Tanh ? 1.0 - out * out : (z > 0.0 ? 1.0 : 0.0);
}

// Per-layer pre-activations and outputs for one example. acts[0] is the input.
struct Trace {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> acts;
};

Trace run_forward(const ModelParams& model, std::span<const double> features) {
    if (features.size() != model.input_dim())
        throw ConfigError("feature dim " + std::to_string(features.size()) + " does not match model input dim " +
                          std::to_string(model.input_dim()));
    Trace trace;
    trace.acts.emplace_back(features.begin(), features.end());
    const std::size_t last = model.layers.size() - 1;
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        const Layer& layer = model.layers[k];
        const std::vector<double>& in = trace.acts.back();
        std::vector<double> z(layer.bias);
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            const double* row = &layer.weight.data[r * layer.weight.cols];
            double acc = 0.0;
            for (std::size_t c = 0; c < layer.in_dim(); ++c) acc += row[c] * in[c];
            z[r] += acc;
        }
        std::vector<double> a(z.size());
        if (k == last) {
            a = z;
        } else {
            std::transform(z.begin(), z.end(), a.begin(), [&](double v) { return activate(model.activation, v); });
        }
        trace.pre.push_back(std::move(z));
        trace.acts.push_back(std::move(a));
    }
    return trace;
}

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

void check_target(const ModelParams& model, const Example& ex) {
    if (model.head == Head::Regression) {
        if (ex.target.size() != model.output_dim())
            throw ConfigError("example " + std::to_string(ex.example_id) + ": target dim " +
                              std::to_string(ex.target.size()) + " does not match model output dim " +
                              std::to_string(model.output_dim()));
    } else if (ex.label >= model.output_dim()) {
        throw ConfigError("example " + std::to_string(ex.example_id) + ": class label " + std::to_string(ex.label) +
                          " out of range for " + std::to_string(model.output_dim()) + " classes");
    }
}

// Loss of one output vector and dLoss/dOutput written into `grad` when given.
double output_loss(const ModelParams& model, const Example& ex, std::span<const double> out,
                   std::vector<double>* grad) {
    double loss = 0.0;
    const auto n = static_cast<double>(out.size());
    if (model.head == Head::Regression) {
        if (grad) grad->assign(out.size(), 0.0);
        for (std::size_t d = 0; d < out.size(); ++d) {
            const double diff = out[d] - ex.target[d];
            loss += diff * diff;
            if (grad) (*grad)[d] = 2.0 * diff / n;
        }
        loss /= n;
    } else {
        const double lse = log_sum_exp(out);
        loss = lse - out[ex.label];
        if (grad) {
            grad->resize(out.size());
            for (std::size_t d = 0; d < out.size(); ++d) (*grad)[d] = std::exp(out[d] - lse);
            (*grad)[ex.label] -= 1.0;
        }
    }
    if (!std::isfinite(loss)) throw NumericError("non-finite loss", ex.example_id);
    return loss;
}

}  // namespace

std::vector<double> forward(const ModelParams& model, std::span<const double> features) {
    Trace trace = run_forward(model, features);
    for (double v : trace.acts.back())
        if (!std::isfinite(v)) throw NumericError("non-finite model output");
    return std::move(trace.acts.back());
}

double per_example_loss(const ModelParams& model, const Example& example) {
    check_target(model, example);
    Trace trace;
    try {
        trace = run_forward(model, example.features);
    } catch (const ConfigError& e) {
        throw ConfigError("example " + std::to_string(example.example_id) + ": " + e.what());
    }
    return output_loss(model, example, trace.acts.back(), nullptr);
}

Gradients zeros_like(const ModelParams& model) {
    Gradients g;
    g.layers.reserve(model.layers.size());
    for (const Layer& layer : model.layers)
        g.layers.push_back(Layer{DenseMatrix(layer.weight.rows, layer.weight.cols), std::vector<double>(layer.bias.size())});
    return g;
}

LossAndGrad backward(const ModelParams& model, std::span<const Example> batch) {
    std::vector<double> ones(batch.size(), 1.0);
    return backward(model, batch, ones);
}

LossAndGrad backward(const ModelParams& model, std::span<const Example> batch, std::span<const double> weights) {
    if (batch.empty()) throw UsageError("backward: empty batch");
    if (weights.size() != batch.size()) throw UsageError("backward: weight count does not match batch size");

    LossAndGrad result{0.0, zeros_like(model)};
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const std::size_t last = model.layers.size() - 1;
    std::vector<double> delta;
    std::vector<double> next_delta;

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Example& ex = batch[i];
        check_target(model, ex);
        const Trace trace = run_forward(model, ex.features);
        const double loss = output_loss(model, ex, trace.acts.back(), &delta);
        result.mean_loss += weights[i] * loss;
        const double scale = weights[i] * inv_n;
        for (double& d : delta) d *= scale;

        for (std::size_t k = last + 1; k-- > 0;) {
            const Layer& layer = model.layers[k];
            Layer& g = result.grads.layers[k];
            if (k != last) {
                for (std::size_t r = 0; r < delta.size(); ++r)
                    delta[r] *= activate_grad(model.activation, trace.pre[k][r], trace.acts[k + 1][r]);
            }
            const std::vector<double>& in = trace.acts[k];
            for (std::size_t r = 0; r < layer.out_dim(); ++r) {
                double* grow = &g.weight.data[r * g.weight.cols];
                for (std::size_t c = 0; c < layer.in_dim(); ++c) grow[c] += delta[r] * in[c];
                g.bias[r] += delta[r];
            }
            if (k > 0) {
                next_delta.assign(layer.in_dim(), 0.0);
                for (std::size_t r = 0; r < layer.out_dim(); ++r) {
                    const double* row = &layer.weight.data[r * layer.weight.cols];
                    for (std::size_t c = 0; c < layer.in_dim(); ++c) next_delta[c] += row[c] * delta[r];
                }
                delta.swap(next_delta);
            }
        }
    }
    result.mean_loss *= inv_n;
    return result;
}

ModelParams sgd_step(const ModelParams& model, const Gradients& grads, double lr) {
    if (grads.layers.size() != model.layers.size()) throw ConfigError("sgd_step: gradient layer count mismatch");
    ModelParams next = model;
    for (std::size_t k = 0; k < next.layers.size(); ++k) {
        Layer& layer = next.layers[k];
        const Layer& g = grads.layers[k];
        if (g.weight.rows != layer.weight.rows || g.weight.cols != layer.weight.cols ||
            g.weight.data.size() != layer.weight.data.size() || g.bias.size() != layer.bias.size())
            throw ConfigError("sgd_step: gradient shape mismatch at layer " + std::to_string(k));
        for (std::size_t i = 0; i < layer.weight.data.size(); ++i) layer.weight.data[i] -= lr * g.weight.data[i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= lr * g.bias[i];
    }
    return next;
}

std::size_t parameter_count(const ModelParams& model) {
    std::size_t n = 0;
    for (const Layer& layer : model.layers) n += layer.weight.data.size() + layer.bias.size();
    return n;
}

namespace {

std::vector<double> flatten_layers(const std::vector<Layer>& layers) {
    std::vector<double> flat;
    for (const Layer& layer : layers) {
        flat.insert(flat.end(), layer.weight.data.begin(), layer.weight.data.end());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

}  // namespace

std::vector<double> flatten(const ModelParams& model) { return flatten_layers(model.layers); }

std::vector<double> flatten(const Gradients& grads) { return flatten_layers(grads.layers); }

ModelParams with_parameters(const ModelParams& model, std::span<const double> flat) {
    if (flat.size() != parameter_count(model)) throw ConfigError("with_parameters: flat vector has wrong length");
    ModelParams out = model;
    std::size_t pos = 0;
    for (Layer& layer : out.layers) {
        for (double& w : layer.weight.data) w = flat[pos++];
        for (double& b : layer.bias) b = flat[pos++];
    }
    return out;
}

}  // namespace amr
