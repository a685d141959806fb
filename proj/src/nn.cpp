#include "otae/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "otae/errors.hpp"
#include "otae/rng.hpp"

namespace otae::nn {

namespace {

constexpr double kProbFloor = 1e-12;

void apply_activation(Activation act, Tensor2& z) {
    switch (act) {
    case Activation::relu:
        for (double& v : z.data) v = v > 0.0 ? v : 0.0;
        break;
    case Activation::tanh:
        for (double& v : z.data) v = std::tanh(v);
        break;
    case Activation::linear:
        break;
    case Activation::softmax:
        for (std::size_t i = 0; i < z.rows; ++i) {
            auto r = z.row(i);
            const double mx = *std::max_element(r.begin(), r.end());
            double s = 0.0;
            for (double& v : r) {
                v = std::exp(v - mx);
                s += v;
            }
            for (double& v : r) v /= s;
        }
        break;
    }
}

void require_finite(const Tensor2& t, const std::string& what) {
    if (!t.all_finite()) throw NumericError("non-finite value in " + what);
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
    case Activation::softmax: return "softmax";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "linear") return Activation::linear;
    if (s == "softmax") return Activation::softmax;
    throw ConfigError("unknown activation '" + s + "'");
}

std::vector<LayerSpec> MlpParams::specs() const {
    std::vector<LayerSpec> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back(l.spec);
    return out;
}

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

void validate_specs(std::span<const LayerSpec> specs) {
    if (specs.empty()) throw ConfigError("network needs at least one layer");
    for (std::size_t l = 0; l < specs.size(); ++l) {
        const auto& s = specs[l];
        if (s.input_dim == 0 || s.output_dim == 0)
            throw ConfigError("layer " + std::to_string(l) + " has a zero dimension");
        if (l > 0 && specs[l - 1].output_dim != s.input_dim)
            throw ConfigError("layer " + std::to_string(l - 1) + " outputs " +
                              std::to_string(specs[l - 1].output_dim) + " but layer " +
                              std::to_string(l) + " expects " + std::to_string(s.input_dim));
        if (s.activation == Activation::softmax && l + 1 != specs.size())
            throw ConfigError("softmax is only allowed on the final layer");
    }
}

MlpParams init_params(std::span<const LayerSpec> specs, std::uint64_t seed) {
    validate_specs(specs);
    MlpParams p;
    p.seed = seed;
    p.init_scheme = "fan_in_uniform(relu:sqrt(6/fan_in),other:sqrt(3/fan_in));bias=0";
    Rng rng(derive_seed(seed, "init"));
    for (const auto& s : specs) {
        const double gain = s.activation == Activation::relu ? 6.0 : 3.0;
        const double limit = std::sqrt(gain / static_cast<double>(s.input_dim));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer{s, Tensor2(s.input_dim, s.output_dim), std::vector<double>(s.output_dim, 0.0)};
        for (double& w : layer.weights.data) w = dist(rng);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

ForwardResult forward(const MlpParams& params, const Tensor2& batch, Exec exec) {
    if (params.layers.empty()) throw ConfigError("forward: empty network");
    if (batch.cols != params.input_dim())
        throw ShapeError("forward: batch has " + std::to_string(batch.cols) +
                         " columns, network expects " + std::to_string(params.input_dim()));
    ForwardResult res;
    res.cache.inputs.reserve(params.layers.size());
    res.cache.outputs.reserve(params.layers.size());
    const Tensor2* x = &batch;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        res.cache.inputs.push_back(*x);
        Tensor2 z;
        kernels::affine(*x, layer.weights, layer.bias, z, exec);
        apply_activation(layer.spec.activation, z);
        require_finite(z, "forward output of layer " + std::to_string(l));
        res.cache.outputs.push_back(std::move(z));
        x = &res.cache.outputs.back();
    }
    res.output = res.cache.outputs.back();
    return res;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
    MlpGrads g;
    for (const auto& l : params.layers) {
        g.weights.emplace_back(l.weights.rows, l.weights.cols);
        g.bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& o) {
    if (o.weights.size() != weights.size()) throw InternalError("gradient layer count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!weights[l].same_shape(o.weights[l]) || bias[l].size() != o.bias[l].size())
            throw InternalError("gradient shape mismatch at layer " + std::to_string(l));
        for (std::size_t k = 0; k < weights[l].size(); ++k) weights[l].data[k] += o.weights[l].data[k];
        for (std::size_t k = 0; k < bias[l].size(); ++k) bias[l][k] += o.bias[l][k];
    }
    return *this;
}

MlpGrads& MlpGrads::operator*=(double k) {
    for (auto& w : weights)
        for (double& v : w.data) v *= k;
    for (auto& b : bias)
        for (double& v : b) v *= k;
    return *this;
}

BackwardResult backward(const MlpParams& params, const ForwardCache& cache, const Tensor2& output_grad,
                        Exec exec) {
    const std::size_t n_layers = params.layers.size();
    if (cache.inputs.size() != n_layers || cache.outputs.size() != n_layers)
        throw InternalError("backward: cache has " + std::to_string(cache.inputs.size()) +
                            " layers, network has " + std::to_string(n_layers));
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& s = params.layers[l].spec;
        if (cache.inputs[l].cols != s.input_dim || cache.outputs[l].cols != s.output_dim ||
            cache.inputs[l].rows != cache.outputs[l].rows)
            throw InternalError("backward: stale cache at layer " + std::to_string(l));
    }
    if (!output_grad.same_shape(cache.outputs.back()))
        throw ShapeError("backward: output grad " + shape_str(output_grad) + " vs output " +
                         shape_str(cache.outputs.back()));

    BackwardResult res;
    res.grads = MlpGrads::zeros_like(params);
    Tensor2 delta = output_grad;
    for (std::size_t li = n_layers; li-- > 0;) {
        const auto& layer = params.layers[li];
        const Tensor2& y = cache.outputs[li];
        switch (layer.spec.activation) {
        case Activation::relu:
            for (std::size_t k = 0; k < delta.size(); ++k)
                if (!(y.data[k] > 0.0)) delta.data[k] = 0.0;
            break;
        case Activation::tanh:
            for (std::size_t k = 0; k < delta.size(); ++k) delta.data[k] *= 1.0 - y.data[k] * y.data[k];
            break;
        case Activation::linear:
        case Activation::softmax:  // folded into the loss gradient
            break;
        }
        kernels::matmul_tn(cache.inputs[li], delta, res.grads.weights[li], exec);
        auto& gb = res.grads.bias[li];
        for (std::size_t i = 0; i < delta.rows; ++i)
            for (std::size_t j = 0; j < delta.cols; ++j) gb[j] += delta(i, j);
        Tensor2 prev;
        kernels::matmul_nt(delta, layer.weights, prev, exec);
        delta = std::move(prev);
    }
    res.input_grad = std::move(delta);
    return res;
}

LossResult mse_loss(const Tensor2& pred, const Tensor2& target) {
    if (!pred.same_shape(target))
        throw ShapeError("mse_loss: " + shape_str(pred) + " vs " + shape_str(target));
    if (pred.size() == 0) throw ShapeError("mse_loss: empty input");
    const double inv = 1.0 / static_cast<double>(pred.size());
    LossResult r{0.0, Tensor2(pred.rows, pred.cols)};
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double d = pred.data[k] - target.data[k];
        r.loss += d * d;
        r.grad.data[k] = 2.0 * d * inv;
    }
    r.loss *= inv;
    return r;
}

Tensor2 one_hot(std::span<const int> labels, std::size_t classes) {
    Tensor2 t(labels.size(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw DataError("label " + std::to_string(labels[i]) + " outside [0, " +
                            std::to_string(classes) + ")");
        t(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return t;
}

std::vector<int> argmax_rows(const Tensor2& t) {
    std::vector<int> out(t.rows, 0);
    for (std::size_t i = 0; i < t.rows; ++i) {
        auto r = t.row(i);
        out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

std::vector<double> nll_per_row(const Tensor2& probs, std::span<const int> labels) {
    if (labels.size() != probs.rows) throw ShapeError("nll_per_row: label count != rows");
    std::vector<double> out(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i)
        out[i] = -std::log(std::max(probs(i, static_cast<std::size_t>(labels[i])), kProbFloor));
    return out;
}

LossResult cross_entropy_loss(const Tensor2& probs, const Tensor2& onehot,
                              std::span<const double> sample_weights) {
    if (!probs.same_shape(onehot))
        throw ShapeError("cross_entropy_loss: " + shape_str(probs) + " vs " + shape_str(onehot));
    if (sample_weights.size() != probs.rows)
        throw ShapeError("cross_entropy_loss: " + std::to_string(sample_weights.size()) +
                         " weights for " + std::to_string(probs.rows) + " rows");
    if (probs.rows == 0) throw ShapeError("cross_entropy_loss: empty input");
    std::vector<int> labels(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        int hot = -1;
        for (std::size_t j = 0; j < onehot.cols; ++j) {
            const double v = onehot(i, j);
            if (v == 1.0 && hot < 0) {
                hot = static_cast<int>(j);
            } else if (v != 0.0) {
                hot = -2;
                break;
            }
        }
        if (hot < 0) throw DataError("label row " + std::to_string(i) + " is not one-hot");
        labels[i] = hot;
        if (!(sample_weights[i] >= 0.0))
            throw ConfigError("sample weight " + std::to_string(i) + " is negative or NaN");
    }
    const double inv = 1.0 / static_cast<double>(probs.rows);
    const auto nll = nll_per_row(probs, labels);
    LossResult r{0.0, Tensor2(probs.rows, probs.cols)};
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const double w = sample_weights[i];
        r.loss += w * nll[i];
        const double s = w * inv;
        for (std::size_t j = 0; j < probs.cols; ++j) r.grad(i, j) = s * (probs(i, j) - onehot(i, j));
    }
    r.loss *= inv;
    return r;
}

OptimizerState make_optimizer_state(const MlpParams& params, const OptimizerConfig& config) {
    if (!(config.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
    if (!config.plain_sgd && (config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 ||
                              config.beta2 >= 1.0 || config.epsilon <= 0.0))
        throw ConfigError("Adam moments need beta1, beta2 in [0, 1) and epsilon > 0");
    OptimizerState s;
    s.config = config;
    for (const auto& l : params.layers) {
        s.m_weights.emplace_back(l.weights.rows, l.weights.cols);
        s.v_weights.emplace_back(l.weights.rows, l.weights.cols);
        s.m_bias.emplace_back(l.bias.size(), 0.0);
        s.v_bias.emplace_back(l.bias.size(), 0.0);
    }
    return s;
}

void optimizer_step(MlpParams& params, const MlpGrads& grads, OptimizerState& state) {
    const std::size_t n = params.layers.size();
    if (grads.weights.size() != n || grads.bias.size() != n || state.m_weights.size() != n)
        throw ShapeError("optimizer_step: layer count mismatch");
    for (std::size_t l = 0; l < n; ++l) {
        const auto& layer = params.layers[l];
        if (!grads.weights[l].same_shape(layer.weights) || grads.bias[l].size() != layer.bias.size() ||
            !state.m_weights[l].same_shape(layer.weights))
            throw ShapeError("optimizer_step: shape mismatch at layer " + std::to_string(l));
        if (!grads.weights[l].all_finite())
            throw NumericError("non-finite gradient in weights of layer " + std::to_string(l));
        for (double v : grads.bias[l])
            if (!std::isfinite(v))
                throw NumericError("non-finite gradient in bias of layer " + std::to_string(l));
    }

    ++state.step;
    const auto& c = state.config;
    if (c.plain_sgd) {
        for (std::size_t l = 0; l < n; ++l) {
            auto& layer = params.layers[l];
            for (std::size_t k = 0; k < layer.weights.size(); ++k)
                layer.weights.data[k] -= c.learning_rate * grads.weights[l].data[k];
            for (std::size_t k = 0; k < layer.bias.size(); ++k)
                layer.bias[k] -= c.learning_rate * grads.bias[l][k];
        }
        return;
    }

    const double t = static_cast<double>(state.step);
    const double corr1 = 1.0 - std::pow(c.beta1, t);
    const double corr2 = 1.0 - std::pow(c.beta2, t);
    auto update = [&](double& p, double& m, double& v, double g) {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        const double mhat = m / corr1;
        const double vhat = v / corr2;
        p -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    };
    for (std::size_t l = 0; l < n; ++l) {
        auto& layer = params.layers[l];
        for (std::size_t k = 0; k < layer.weights.size(); ++k)
            update(layer.weights.data[k], state.m_weights[l].data[k], state.v_weights[l].data[k],
                   grads.weights[l].data[k]);
        for (std::size_t k = 0; k < layer.bias.size(); ++k)
            update(layer.bias[k], state.m_bias[l][k], state.v_bias[l][k], grads.bias[l][k]);
    }
}

}  // namespace otae::nn
