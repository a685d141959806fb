#pragma once

// Small dense-network engine: fully connected layers, explicit forward cache,
// hand-derived backward pass and an Adam/SGD optimizer.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "otae/kernels.hpp"
#include "otae/tensor.hpp"

namespace otae::nn {

enum class Activation { relu, tanh, linear, softmax };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::linear;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct DenseLayer {
    LayerSpec spec;
    Tensor2 weights;            // input_dim x output_dim
    std::vector<double> bias;   // output_dim

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpParams {
    std::vector<DenseLayer> layers;
    std::uint64_t seed = 0;
    std::string init_scheme;

    std::size_t input_dim() const { return layers.front().spec.input_dim; }
    std::size_t output_dim() const { return layers.back().spec.output_dim; }
    std::vector<LayerSpec> specs() const;
    std::size_t parameter_count() const;

    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Throws ConfigError unless the specs are nonempty, positive and shape-chained,
/// with softmax at most on the last layer.
void validate_specs(std::span<const LayerSpec> specs);

/// Fan-in scaled uniform weights: U(-sqrt(6/fan_in), +) for relu layers and
/// U(-sqrt(3/fan_in), +) otherwise. Biases start at zero.
MlpParams init_params(std::span<const LayerSpec> specs, std::uint64_t seed);

struct ForwardCache {
    std::vector<Tensor2> inputs;   // input to layer l
    std::vector<Tensor2> outputs;  // post-activation output of layer l
};

struct ForwardResult {
    Tensor2 output;
    ForwardCache cache;
};

ForwardResult forward(const MlpParams& params, const Tensor2& batch, Exec exec = Exec::parallel);

struct MlpGrads {
    std::vector<Tensor2> weights;
    std::vector<std::vector<double>> bias;

    static MlpGrads zeros_like(const MlpParams& params);
    MlpGrads& operator+=(const MlpGrads& other);
    MlpGrads& operator*=(double k);
};

struct BackwardResult {
    MlpGrads grads;
    Tensor2 input_grad;
};

/// Back-propagates `output_grad` through the layers recorded in `cache`.
/// When the last layer is softmax, `output_grad` is taken with respect to its
/// pre-softmax input (the softmax Jacobian is folded into cross-entropy).
BackwardResult backward(const MlpParams& params, const ForwardCache& cache, const Tensor2& output_grad,
                        Exec exec = Exec::parallel);

struct LossResult {
    double loss = 0.0;
    Tensor2 grad;
};

/// Mean over all elements of the squared difference.
LossResult mse_loss(const Tensor2& pred, const Tensor2& target);

/// Weighted mean negative log-likelihood: sum_n w_n * -log p(n, y_n) / rows.
/// `grad` is with respect to the softmax input: w_n * (p_n - y_n) / rows.
LossResult cross_entropy_loss(const Tensor2& probs, const Tensor2& onehot,
                              std::span<const double> sample_weights);

/// Per-row -log p(true class), with p clamped from below at 1e-12.
std::vector<double> nll_per_row(const Tensor2& probs, std::span<const int> labels);

Tensor2 one_hot(std::span<const int> labels, std::size_t classes);
/// Index of the largest entry per row; ties go to the lowest index.
std::vector<int> argmax_rows(const Tensor2& t);

struct OptimizerConfig {
    double learning_rate = 1e-3;
    bool plain_sgd = false;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    OptimizerConfig config;
    std::vector<Tensor2> m_weights, v_weights;
    std::vector<std::vector<double>> m_bias, v_bias;
    std::uint64_t step = 0;
};

OptimizerState make_optimizer_state(const MlpParams& params, const OptimizerConfig& config);

/// One Adam (or plain SGD) update. Throws NumericError naming the layer if any
/// gradient entry is non-finite; params are left untouched in that case.
void optimizer_step(MlpParams& params, const MlpGrads& grads, OptimizerState& state);

}  // namespace otae::nn
