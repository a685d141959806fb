#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "otae/errors.hpp"
#include "otae/model.hpp"
#include "support.hpp"

using namespace otae;
using namespace otae::model;
using otae::testing::central_difference;
using otae::testing::gradients_agree;
using otae::testing::random_matrix;

namespace {

struct Batch {
    Tensor2 x;
    std::vector<int> labels;
    std::vector<std::size_t> subjects;
};

Batch random_batch(std::mt19937_64& rng, std::size_t rows, std::size_t dim, std::size_t classes, std::size_t n_subj) {
    Batch b{random_matrix(rng, rows, dim), {}, {}};
    for (std::size_t i = 0; i < rows; ++i) {
        b.labels.push_back(static_cast<int>(rng() % classes));
        b.subjects.push_back(rng() % n_subj);
    }
    return b;
}

weighting::SubjectWeights random_weights(std::mt19937_64& rng, std::size_t n_subj) {
    weighting::Alphas a;
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (std::size_t s = 0; s < n_subj; ++s) {
        a.subjects.push_back("s" + std::to_string(s));
        a.values.push_back(u(rng));
    }
    return weighting::compute_lambdas(a, weighting::Mode::budget, std::uniform_real_distribution<double>(0.2, 0.8)(rng));
}

void perturb_biases(AutoencoderClassifier& m, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 0.3);
    for (auto* net : {&m.encoder, &m.decoder, &m.classifier})
        for (auto& l : net->layers)
            for (double& b : l.bias) b = n(rng);
}

// Compares every parameter's analytic gradient against central differences;
// returns the largest relative error among entries of magnitude above 1e-6.
double check_gradients(AutoencoderClassifier& m, const Batch& b, const weighting::SubjectWeights& w, double wr,
                       std::size_t& failures) {
    const auto lg = composite_loss(m, b.x, b.labels, b.subjects, w, wr);
    auto total = [&] { return composite_loss(m, b.x, b.labels, b.subjects, w, wr).breakdown.total; };
    double worst = 0.0;
    auto visit = [&](nn::MlpParams& net, const nn::MlpGrads& g) {
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            auto& layer = net.layers[l];
            for (std::size_t k = 0; k < layer.weights.size(); ++k) {
                const double fd = central_difference(total, &layer.weights.data[k]);
                const double an = g.weights[l].data[k];
                if (!gradients_agree(an, fd)) ++failures;
                if (std::max(std::abs(an), std::abs(fd)) > 1e-6) worst = std::max(worst, otae::testing::relative_error(an, fd));
            }
            for (std::size_t k = 0; k < layer.bias.size(); ++k) {
                const double fd = central_difference(total, &layer.bias[k]);
                const double an = g.bias[l][k];
                if (!gradients_agree(an, fd)) ++failures;
                if (std::max(std::abs(an), std::abs(fd)) > 1e-6) worst = std::max(worst, otae::testing::relative_error(an, fd));
            }
        }
    };
    visit(m.encoder, lg.grads.encoder);
    visit(m.decoder, lg.grads.decoder);
    visit(m.classifier, lg.grads.classifier);
    return worst;
}

data::LabeledDataset small_synth(std::size_t subjects, std::uint64_t seed, std::vector<double> multipliers = {}) {
    data::SyntheticConfig cfg;
    cfg.subjects = subjects;
    cfg.classes = 3;
    cfg.dim = 6;
    cfg.per_class = 8;
    cfg.multipliers = std::move(multipliers);
    cfg.seed = seed;
    return data::synth_generate(cfg).as_train_split();
}

TrainConfig small_config(std::size_t epochs) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 16;
    c.learning_rate = 5e-3;
    c.arch.encoder_hidden = {8};
    c.arch.latent_dim = 3;
    c.arch.classifier_hidden = {6};
    c.seed = 21;
    return c;
}

}  // namespace

TEST_CASE("make_model wires the three networks") {
    const auto m = make_model(10, 4, Architecture{}, 3);
    CHECK_NOTHROW(m.validate());
    CHECK(m.input_dim() == 10);
    CHECK(m.latent_dim() == 8);
    CHECK(m.classes() == 4);
    CHECK(m.encoder.layers.back().spec.activation == nn::Activation::linear);
    CHECK(m.decoder.layers.back().spec.activation == nn::Activation::linear);
    CHECK(m.decoder.output_dim() == 10);
    CHECK(m.classifier.layers.back().spec.activation == nn::Activation::softmax);
    CHECK(make_model(10, 4, Architecture{}, 3) == m);
}

TEST_CASE("composite_loss degenerate weights") {
    std::mt19937_64 rng(5);
    const auto m = make_model(5, 3, Architecture{{6}, 3, {4}}, 9);
    const auto b = random_batch(rng, 9, 5, 3, 3);
    const std::vector<std::string> ids{"s0", "s1", "s2"};

    const auto g = composite_loss(m, b.x, b.labels, b.subjects, weighting::SubjectWeights::group_only(ids), 0.7);
    const auto probs = predict_proba(m, b.x);
    double ce = 0.0;
    for (std::size_t i = 0; i < 9; ++i) ce += -std::log(probs(i, static_cast<std::size_t>(b.labels[i])));
    ce /= 9.0;
    const auto dec = nn::forward(m.decoder, encode(m, b.x)).output;
    const double r = nn::mse_loss(dec, b.x).loss;
    CHECK(g.breakdown.c_s == 0.0);
    CHECK(std::abs(g.breakdown.c_g - ce) <= 1e-12);
    CHECK(std::abs(g.breakdown.total - (0.7 * r + ce)) <= 1e-12);

    // One subject, all weight on its own term.
    auto w = weighting::SubjectWeights::group_only({"only"});
    w.lambda_group = 0.0;
    w.lambda = {1.0};
    const std::vector<std::size_t> same(9, 0);
    const auto s = composite_loss(m, b.x, b.labels, same, w, 1.0);
    CHECK(s.breakdown.c_g == 0.0);
    CHECK(std::abs(s.breakdown.c_s - ce) <= 1e-12);

    const std::vector<std::string> unknown(9, "zz");
    CHECK_THROWS_AS(composite_loss(m, b.x, b.labels, unknown, weighting::SubjectWeights::group_only(ids), 1.0),
                    ConfigError);
}

TEST_CASE("composite_loss gradients match central differences") {
    std::mt19937_64 rng(99);
    double worst = 0.0;
    std::size_t failures = 0;
    const nn::Activation acts[] = {nn::Activation::tanh, nn::Activation::relu};
    for (int trial = 0; trial < 12; ++trial) {
        Architecture arch;
        arch.encoder_hidden = {1 + rng() % 6};
        arch.latent_dim = 1 + rng() % 4;
        arch.classifier_hidden = trial % 3 == 0 ? std::vector<std::size_t>{} : std::vector<std::size_t>{1 + rng() % 5};
        arch.hidden_activation = acts[trial % 2];
        const std::size_t d = 1 + rng() % 6, C = 2 + rng() % 3, S = 2 + rng() % 3;
        auto m = make_model(d, C, arch, 500 + trial);
        perturb_biases(m, rng);
        const auto b = random_batch(rng, 1 + rng() % 8, d, C, S);
        worst = std::max(worst, check_gradients(m, b, random_weights(rng, S), 0.5 + trial * 0.1, failures));
    }
    CHECK(failures == 0);
    MESSAGE("worst relative gradient error: " << worst);
}

TEST_CASE("composite_loss: additivity and scaling") {
    std::mt19937_64 rng(6);
    const auto m = make_model(4, 3, Architecture{{5}, 2, {4}}, 2);
    const auto b = random_batch(rng, 12, 4, 3, 4);
    auto w = random_weights(rng, 4);
    const auto base = composite_loss(m, b.x, b.labels, b.subjects, w, 1.3);
    const auto& br = base.breakdown;
    CHECK(std::abs(br.c_s - std::accumulate(br.c_s_i.begin(), br.c_s_i.end(), 0.0)) <= 1e-9);
    CHECK(std::abs(br.total - (1.3 * br.r_g + br.c_g + br.c_s)) <= 1e-9);

    auto w2 = w;
    w2.lambda_group *= 2.0;
    for (double& l : w2.lambda) l *= 2.0;
    // Dropping the reconstruction term isolates the classifier gradients.
    const auto scaled = composite_loss(m, b.x, b.labels, b.subjects, w2, 1.3);
    CHECK(std::abs((scaled.breakdown.c_g + scaled.breakdown.c_s) - 2.0 * (br.c_g + br.c_s)) <= 1e-12);
    CHECK(scaled.breakdown.r_g == br.r_g);
    const auto& g1 = base.grads.classifier;
    const auto& g2 = scaled.grads.classifier;
    for (std::size_t l = 0; l < g1.weights.size(); ++l)
        for (std::size_t k = 0; k < g1.weights[l].size(); ++k)
            CHECK(std::abs(g2.weights[l].data[k] - 2.0 * g1.weights[l].data[k]) <= 1e-12);

    // With no classifier weight, the encoder gradient comes from the decoder alone.
    auto none = w;
    none.lambda_group = 0.0;
    std::fill(none.lambda.begin(), none.lambda.end(), 0.0);
    const auto recon_only = composite_loss(m, b.x, b.labels, b.subjects, none, 1.3);
    const auto fwd = nn::forward(m.encoder, b.x);
    const auto dfwd = nn::forward(m.decoder, fwd.output);
    auto g = nn::mse_loss(dfwd.output, b.x).grad;
    for (double& v : g.data) v *= 1.3;
    const auto dback = nn::backward(m.decoder, dfwd.cache, g);
    const auto eback = nn::backward(m.encoder, fwd.cache, dback.input_grad);
    for (std::size_t l = 0; l < eback.grads.weights.size(); ++l)
        CHECK(eback.grads.weights[l] == recon_only.grads.encoder.weights[l]);
}

TEST_CASE("full-batch subject terms do not depend on row order") {
    std::mt19937_64 rng(7);
    const auto m = make_model(4, 3, Architecture{{5}, 3, {4}}, 1);
    const auto b = random_batch(rng, 20, 4, 3, 3);
    const auto w = random_weights(rng, 3);
    const auto ref = composite_loss(m, b.x, b.labels, b.subjects, w, 1.0).breakdown;
    std::vector<std::size_t> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    for (int t = 0; t < 5; ++t) {
        std::shuffle(perm.begin(), perm.end(), rng);
        Batch p{b.x.select_rows(perm), {}, {}};
        for (auto i : perm) {
            p.labels.push_back(b.labels[i]);
            p.subjects.push_back(b.subjects[i]);
        }
        const auto got = composite_loss(m, p.x, p.labels, p.subjects, w, 1.0).breakdown;
        for (std::size_t s = 0; s < 3; ++s) CHECK(std::abs(got.c_s_i[s] - ref.c_s_i[s]) <= 1e-9);
        CHECK(std::abs(got.total - ref.total) <= 1e-9);
    }
}

TEST_CASE("train: zero epochs, determinism, baseline equivalence") {
    const auto ds = small_synth(3, 4);
    const auto cfg0 = small_config(0);
    const auto r0 = train(ds, cfg0);
    CHECK(r0.model == make_model(ds.dim, ds.classes, cfg0.arch, cfg0.seed));
    CHECK(r0.history.empty());

    const auto a = train(ds, small_config(4));
    const auto b = train(ds, small_config(4));
    CHECK(a.model == b.model);
    CHECK(a.weights.lambda == b.weights.lambda);
    REQUIRE(a.history.size() == 4);
    for (const auto& rec : a.history) {
        CHECK(rec.batches == 5);
        CHECK(std::abs(rec.mean.total - (rec.mean.r_g + rec.mean.c_g + rec.mean.c_s)) <= 1e-9);
    }

    auto base = small_config(0);
    base.loss_mode = LossMode::mse_baseline;
    auto degenerate = small_config(0);
    degenerate.fixed_weights = weighting::SubjectWeights::group_only(ds.subjects);
    for (std::size_t e = 1; e <= 6; ++e) {
        base.epochs = degenerate.epochs = e;
        const auto rb = train(ds, base);
        const auto rw = train(ds, degenerate);
        CHECK(rb.model == rw.model);
        CHECK(rb.history.back().mean.total == rw.history.back().mean.total);
    }

    CHECK(train(ds, small_config(2), Exec::serial).model == train(ds, small_config(2), Exec::parallel).model);
}

TEST_CASE("train: outlier subject gets a below-median lambda") {
    const auto ds = small_synth(6, 11, {1, 1, 4});
    const auto r = train(ds, small_config(1));
    auto sorted = r.weights.lambda;
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[2] + sorted[3]);
    CHECK(r.weights.lambda[r.weights.index_of("s2")] < median);
    CHECK(r.weights.lambda[r.weights.index_of("s2")] == sorted.front());
}

TEST_CASE("train: latent weights refresh on schedule") {
    const auto ds = small_synth(3, 5);
    auto cfg = small_config(7);
    cfg.weighting.space = weighting::Space::latent;
    cfg.weighting.refresh_interval = 3;
    const auto r = train(ds, cfg);
    CHECK(r.weight_log.size() == 3);
    for (const auto& rec : r.history) CHECK(rec.weights_refreshed == (rec.epoch == 3 || rec.epoch == 6));
}

TEST_CASE("encode") {
    AutoencoderClassifier m = make_model(3, 2, Architecture{{}, 3, {}}, 1);
    m.encoder.layers[0].weights = Tensor2::identity(3);
    std::mt19937_64 rng(2);
    const Tensor2 x = random_matrix(rng, 6, 3);
    CHECK(encode(m, x) == x);

    const auto full = make_model(3, 2, Architecture{}, 4);
    const Tensor2 z = encode(full, x);
    CHECK(encode(full, x) == z);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const std::size_t idx[] = {i};
        const Tensor2 zi = encode(full, x.select_rows(idx));
        for (std::size_t k = 0; k < z.cols; ++k) CHECK(std::abs(zi(0, k) - z(i, k)) <= 1e-12);
    }
    CHECK_THROWS_AS(encode(full, random_matrix(rng, 2, 4)), ShapeError);
}

TEST_CASE("checkpoint round trip") {
    const auto ds = small_synth(3, 8);
    const auto cfg = small_config(2);
    const auto r = train(ds, cfg);
    Checkpoint c;
    c.model = r.model;
    c.config = cfg;
    c.weights = r.weights;
    c.normalizer = data::fit_normalizer(ds);
    const auto path = std::filesystem::temp_directory_path() / "otae_ckpt_test.json";
    save_checkpoint(c, path);
    const auto back = load_checkpoint(path);
    std::filesystem::remove(path);
    CHECK(back.version == kCheckpointVersion);
    CHECK(back.model == c.model);
    CHECK(back.weights.lambda == c.weights.lambda);
    CHECK(back.weights.alpha == c.weights.alpha);
    CHECK(back.config.seed == cfg.seed);
    REQUIRE(back.normalizer);
    CHECK(back.normalizer->mean == c.normalizer->mean);
    CHECK(encode(back.model, ds.features()) == encode(c.model, ds.features()));
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), DataError);
}

TEST_CASE("config validation") {
    auto c = small_config(1);
    c.recon_weight = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(1);
    c.weighting.beta = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(loss_mode_from_string("baseline") == LossMode::mse_baseline);
    CHECK_THROWS_AS(loss_mode_from_string("other"), ConfigError);
}
