#include "otae/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "otae/errors.hpp"
#include "otae/rng.hpp"
#include "otae/serialize.hpp"

namespace otae::model {

std::string to_string(LossMode m) { return m == LossMode::mse_baseline ? "mse_baseline" : "wasserstein_weighted"; }

LossMode loss_mode_from_string(const std::string& s) {
    if (s == "mse_baseline" || s == "baseline") return LossMode::mse_baseline;
    if (s == "wasserstein_weighted" || s == "weighted") return LossMode::wasserstein_weighted;
    throw ConfigError("unknown loss mode '" + s + "' (expected baseline|weighted)");
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
    if (!(recon_weight > 0.0) || !std::isfinite(recon_weight)) throw ConfigError("recon_weight must be > 0");
    if (arch.latent_dim == 0) throw ConfigError("latent_dim must be >= 1");
    for (auto h : arch.encoder_hidden)
        if (h == 0) throw ConfigError("encoder hidden widths must be >= 1");
    for (auto h : arch.classifier_hidden)
        if (h == 0) throw ConfigError("classifier hidden widths must be >= 1");
    if (arch.hidden_activation == nn::Activation::softmax) throw ConfigError("softmax is not a hidden activation");
    if (loss_mode == LossMode::wasserstein_weighted && !fixed_weights) {
        if (weighting.mode == weighting::Mode::budget && !(weighting.beta > 0.0 && weighting.beta < 1.0))
            throw ConfigError("budget beta must lie in (0, 1)");
        if (weighting.space == weighting::Space::latent && weighting.refresh_interval == 0)
            throw ConfigError("latent weighting needs refresh_interval >= 1");
    }
}

void AutoencoderClassifier::validate() const {
    if (encoder.layers.empty() || decoder.layers.empty() || classifier.layers.empty())
        throw ConfigError("model is missing a network");
    const std::size_t k = encoder.output_dim();
    if (decoder.input_dim() != k || classifier.input_dim() != k)
        throw ConfigError("encoder, decoder and classifier disagree on the latent width");
    if (decoder.output_dim() != encoder.input_dim())
        throw ConfigError("decoder output width differs from the input width");
    if (classifier.layers.back().spec.activation != nn::Activation::softmax)
        throw ConfigError("classifier must end in softmax");
}

AutoencoderClassifier make_model(std::size_t input_dim, std::size_t classes, const Architecture& arch,
                                 std::uint64_t seed) {
    if (input_dim == 0 || classes == 0) throw ConfigError("model needs input_dim >= 1 and classes >= 1");
    auto chain = [&](std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, nn::Activation last) {
        std::vector<nn::LayerSpec> specs;
        std::size_t prev = in;
        for (auto h : hidden) {
            specs.push_back({prev, h, arch.hidden_activation});
            prev = h;
        }
        specs.push_back({prev, out, last});
        return specs;
    };
    std::vector<std::size_t> decoder_hidden(arch.encoder_hidden.rbegin(), arch.encoder_hidden.rend());
    AutoencoderClassifier m;
    m.encoder = nn::init_params(chain(input_dim, arch.encoder_hidden, arch.latent_dim, nn::Activation::linear),
                                derive_seed(seed, "init/encoder"));
    m.decoder = nn::init_params(chain(arch.latent_dim, decoder_hidden, input_dim, nn::Activation::linear),
                                derive_seed(seed, "init/decoder"));
    m.classifier = nn::init_params(chain(arch.latent_dim, arch.classifier_hidden, classes, nn::Activation::softmax),
                                   derive_seed(seed, "init/classifier"));
    return m;
}

LossAndGrads composite_loss(const AutoencoderClassifier& model, const Tensor2& x, std::span<const int> labels,
                            std::span<const std::size_t> subject_of, const weighting::SubjectWeights& weights,
                            double recon_weight, Exec exec) {
    const std::size_t rows = x.rows;
    if (rows == 0) throw ShapeError("composite_loss: empty batch");
    if (labels.size() != rows || subject_of.size() != rows)
        throw ShapeError("composite_loss: labels / subjects do not match the batch");
    const std::size_t n_subj = weights.subjects.size();
    if (weights.lambda.size() != n_subj) throw ConfigError("composite_loss: malformed subject weights");
    std::vector<std::size_t> count(n_subj, 0);
    for (auto s : subject_of) {
        if (s >= n_subj) throw ConfigError("composite_loss: batch row refers to an unknown subject");
        ++count[s];
    }

    const auto enc = nn::forward(model.encoder, x, exec);
    const Tensor2& z = enc.output;
    const auto dec = nn::forward(model.decoder, z, exec);
    const auto cls = nn::forward(model.classifier, z, exec);
    const Tensor2& probs = cls.output;

    LossAndGrads out;
    auto& b = out.breakdown;
    const auto recon = nn::mse_loss(dec.output, x);
    b.r_g = recon.loss;

    const auto nll = nn::nll_per_row(probs, labels);
    const double inv_rows = 1.0 / static_cast<double>(rows);
    double nll_sum = 0.0;
    std::vector<double> nll_subj(n_subj, 0.0);
    for (std::size_t n = 0; n < rows; ++n) {
        nll_sum += nll[n];
        nll_subj[subject_of[n]] += nll[n];
    }
    b.c_g = weights.lambda_group * (nll_sum * inv_rows);
    b.c_s_i.assign(n_subj, 0.0);
    for (std::size_t s = 0; s < n_subj; ++s)
        if (count[s] > 0) b.c_s_i[s] = weights.lambda[s] * (nll_subj[s] / static_cast<double>(count[s]));
    for (double v : b.c_s_i) b.c_s += v;
    b.total = recon_weight * b.r_g + b.c_g + b.c_s;
    if (!std::isfinite(b.total)) throw NumericError("composite loss is not finite");

    // d total / d logits = (lambda_g / rows + lambda_i / N_i) * (p - y)
    Tensor2 g_logits(rows, probs.cols);
    for (std::size_t n = 0; n < rows; ++n) {
        const std::size_t s = subject_of[n];
        const double w = weights.lambda_group * inv_rows + weights.lambda[s] / static_cast<double>(count[s]);
        for (std::size_t j = 0; j < probs.cols; ++j)
            g_logits(n, j) = w * (probs(n, j) - (static_cast<int>(j) == labels[n] ? 1.0 : 0.0));
    }
    Tensor2 g_recon = recon.grad;
    for (double& v : g_recon.data) v *= recon_weight;

    auto cls_back = nn::backward(model.classifier, cls.cache, g_logits, exec);
    auto dec_back = nn::backward(model.decoder, dec.cache, g_recon, exec);
    Tensor2 g_latent = dec_back.input_grad;
    for (std::size_t k = 0; k < g_latent.size(); ++k) g_latent.data[k] += cls_back.input_grad.data[k];
    auto enc_back = nn::backward(model.encoder, enc.cache, g_latent, exec);

    out.grads.encoder = std::move(enc_back.grads);
    out.grads.decoder = std::move(dec_back.grads);
    out.grads.classifier = std::move(cls_back.grads);
    return out;
}

LossAndGrads composite_loss(const AutoencoderClassifier& model, const Tensor2& x, std::span<const int> labels,
                            std::span<const std::string> subject_ids, const weighting::SubjectWeights& weights,
                            double recon_weight, Exec exec) {
    std::vector<std::size_t> idx;
    idx.reserve(subject_ids.size());
    for (const auto& s : subject_ids) idx.push_back(weights.index_of(s));
    return composite_loss(model, x, labels, idx, weights, recon_weight, exec);
}

namespace {

weighting::SubjectWeights weights_for_roster(const weighting::SubjectWeights& fixed,
                                             const std::vector<std::string>& roster) {
    weighting::SubjectWeights w = fixed;
    w.subjects = roster;
    w.alpha.clear();
    w.lambda.clear();
    for (const auto& s : roster) {
        const auto k = fixed.index_of(s);
        w.alpha.push_back(fixed.alpha.size() > k ? fixed.alpha[k] : 0.0);
        w.lambda.push_back(fixed.lambda.at(k));
    }
    return w;
}

weighting::SubjectWeights compute_weights(const data::LabeledDataset& ds, const TrainConfig& cfg,
                                          const nn::MlpParams& encoder, Exec exec) {
    const auto& wc = cfg.weighting;
    const auto alphas = weighting::compute_alphas(ds, wc.space, &encoder, wc.estimator,
                                                  derive_seed(cfg.seed, "weights"), exec);
    auto w = weighting::compute_lambdas(alphas, wc.mode, wc.beta);
    w.estimator = wc.estimator;
    w.space = wc.space;
    w.seed = derive_seed(cfg.seed, "weights");
    return w;
}

void accumulate(CompositeLossBreakdown& acc, const CompositeLossBreakdown& b) {
    acc.r_g += b.r_g;
    acc.c_g += b.c_g;
    if (acc.c_s_i.size() < b.c_s_i.size()) acc.c_s_i.resize(b.c_s_i.size(), 0.0);
    for (std::size_t s = 0; s < b.c_s_i.size(); ++s) acc.c_s_i[s] += b.c_s_i[s];
    acc.c_s += b.c_s;
    acc.total += b.total;
}

void scale(CompositeLossBreakdown& b, double k) {
    b.r_g *= k;
    b.c_g *= k;
    for (double& v : b.c_s_i) v *= k;
    b.c_s *= k;
    b.total *= k;
}

}  // namespace

TrainResult train(const data::LabeledDataset& ds, const TrainConfig& cfg, Exec exec) {
    cfg.validate();
    if (ds.samples.empty()) throw DataError("training split is empty");

    TrainResult res;
    res.model = make_model(ds.dim, ds.classes, cfg.arch, cfg.seed);

    const bool weighted = cfg.loss_mode == LossMode::wasserstein_weighted;
    const bool latent_refresh = weighted && !cfg.fixed_weights && cfg.weighting.space == weighting::Space::latent;
    if (!weighted) {
        res.weights = weighting::SubjectWeights::group_only(ds.subjects);
    } else if (cfg.fixed_weights) {
        res.weights = weights_for_roster(*cfg.fixed_weights, ds.subjects);
    } else {
        res.weights = compute_weights(ds, cfg, res.model.encoder, exec);
    }
    res.weight_log.push_back(res.weights);
    if (cfg.epochs == 0) return res;

    const Tensor2 x_all = ds.features();
    const auto labels_all = ds.labels();
    const auto subj_all = ds.subject_indices();  // roster order == weights order

    const nn::OptimizerConfig oc{cfg.learning_rate, cfg.plain_sgd};
    auto st_enc = nn::make_optimizer_state(res.model.encoder, oc);
    auto st_dec = nn::make_optimizer_state(res.model.decoder, oc);
    auto st_cls = nn::make_optimizer_state(res.model.classifier, oc);

    const std::size_t n = ds.size();
    const std::size_t bs = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        if (latent_refresh && epoch > 0 && epoch % cfg.weighting.refresh_interval == 0) {
            res.weights = compute_weights(ds, cfg, res.model.encoder, exec);
            res.weight_log.push_back(res.weights);
            rec.weights_refreshed = true;
        }
        if (bs < n) std::shuffle(order.begin(), order.end(), shuffle_rng);

        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t end = std::min(start + bs, n);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Tensor2 xb = x_all.select_rows(idx);
            std::vector<int> lb;
            std::vector<std::size_t> sb;
            for (auto i : idx) {
                lb.push_back(labels_all[i]);
                sb.push_back(subj_all[i]);
            }
            try {
                auto lg = composite_loss(res.model, xb, lb, sb, res.weights, cfg.recon_weight, exec);
                nn::optimizer_step(res.model.encoder, lg.grads.encoder, st_enc);
                nn::optimizer_step(res.model.decoder, lg.grads.decoder, st_dec);
                nn::optimizer_step(res.model.classifier, lg.grads.classifier, st_cls);
                accumulate(rec.mean, lg.breakdown);
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(rec.batches) +
                                   ": " + e.what());
            }
            ++rec.batches;
        }
        scale(rec.mean, 1.0 / static_cast<double>(rec.batches));
        res.history.push_back(std::move(rec));
    }
    return res;
}

Tensor2 encode(const AutoencoderClassifier& model, const Tensor2& x, Exec exec) {
    return nn::forward(model.encoder, x, exec).output;
}

Tensor2 predict_proba(const AutoencoderClassifier& model, const Tensor2& x, Exec exec) {
    return nn::forward(model.classifier, encode(model, x, exec), exec).output;
}

double accuracy(const AutoencoderClassifier& model, const Tensor2& x, std::span<const int> labels, Exec exec) {
    if (labels.size() != x.rows) throw ShapeError("accuracy: label count != rows");
    if (x.rows == 0) throw DataError("accuracy: no samples");
    const auto pred = nn::argmax_rows(predict_proba(model, x, exec));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
    return static_cast<double>(correct) / static_cast<double>(x.rows);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << serialize::checkpoint_to_json(ckpt).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    return serialize::checkpoint_from_json(j);
}

}  // namespace otae::model
