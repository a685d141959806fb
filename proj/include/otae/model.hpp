#pragma once

// Autoencoder with a classifier head on the latent code. The encoder feeds both
// the decoder (reconstruction loss) and the classifier (group + per-subject
// weighted cross-entropy); all three parts are trained together.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otae/data.hpp"
#include "otae/nn.hpp"
#include "otae/weighting.hpp"

namespace otae::model {

enum class LossMode { mse_baseline, wasserstein_weighted };
std::string to_string(LossMode m);
LossMode loss_mode_from_string(const std::string& s);

struct Architecture {
    std::vector<std::size_t> encoder_hidden{32};
    std::size_t latent_dim = 8;
    std::vector<std::size_t> classifier_hidden{16};
    nn::Activation hidden_activation = nn::Activation::relu;
};

struct WeightingConfig {
    weighting::Mode mode = weighting::Mode::budget;
    double beta = 0.5;
    weighting::Space space = weighting::Space::input;
    std::size_t refresh_interval = 5;  // epochs, latent space only
    weighting::EstimatorConfig estimator;
};

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;  // 0 = full batch
    double learning_rate = 1e-3;
    bool plain_sgd = false;
    double recon_weight = 1.0;
    LossMode loss_mode = LossMode::wasserstein_weighted;
    WeightingConfig weighting;
    Architecture arch;
    std::uint64_t seed = 0;
    /// Skips the distance computation and uses these weights (looked up by subject).
    std::optional<weighting::SubjectWeights> fixed_weights;

    void validate() const;
};

struct AutoencoderClassifier {
    nn::MlpParams encoder;
    nn::MlpParams decoder;
    nn::MlpParams classifier;

    std::size_t input_dim() const { return encoder.input_dim(); }
    std::size_t latent_dim() const { return encoder.output_dim(); }
    std::size_t classes() const { return classifier.output_dim(); }

    /// Throws ConfigError if the three networks do not share the latent width.
    void validate() const;

    friend bool operator==(const AutoencoderClassifier&, const AutoencoderClassifier&) = default;
};

/// encoder d -> hidden... -> k (linear code), decoder mirrored with a linear
/// output, classifier k -> hidden... -> C with softmax.
AutoencoderClassifier make_model(std::size_t input_dim, std::size_t classes, const Architecture& arch,
                                 std::uint64_t seed);

struct CompositeLossBreakdown {
    double r_g = 0.0;               // reconstruction MSE
    double c_g = 0.0;               // lambda_g * mean CE over the batch
    std::vector<double> c_s_i;      // lambda_i * mean CE over subject i's rows (0 if absent)
    double c_s = 0.0;               // sum of c_s_i
    double total = 0.0;             // recon_weight * r_g + c_g + c_s
};

struct ModelGrads {
    nn::MlpGrads encoder;
    nn::MlpGrads decoder;
    nn::MlpGrads classifier;
};

struct LossAndGrads {
    CompositeLossBreakdown breakdown;
    ModelGrads grads;
};

/// `subject_of[n]` indexes `weights.subjects`.
LossAndGrads composite_loss(const AutoencoderClassifier& model, const Tensor2& x, std::span<const int> labels,
                            std::span<const std::size_t> subject_of, const weighting::SubjectWeights& weights,
                            double recon_weight, Exec exec = Exec::parallel);
/// Same, with subjects given by id; an id missing from `weights` is a ConfigError.
LossAndGrads composite_loss(const AutoencoderClassifier& model, const Tensor2& x, std::span<const int> labels,
                            std::span<const std::string> subject_ids, const weighting::SubjectWeights& weights,
                            double recon_weight, Exec exec = Exec::parallel);

struct EpochRecord {
    std::size_t epoch = 0;
    std::size_t batches = 0;
    CompositeLossBreakdown mean;  // averaged over the epoch's batches
    bool weights_refreshed = false;
};

struct TrainResult {
    AutoencoderClassifier model;
    std::vector<EpochRecord> history;
    weighting::SubjectWeights weights;                 // final weights
    std::vector<weighting::SubjectWeights> weight_log; // every (re)computation, in order
};

TrainResult train(const data::LabeledDataset& train_split, const TrainConfig& config, Exec exec = Exec::parallel);

Tensor2 encode(const AutoencoderClassifier& model, const Tensor2& x, Exec exec = Exec::parallel);
/// Softmax class probabilities.
Tensor2 predict_proba(const AutoencoderClassifier& model, const Tensor2& x, Exec exec = Exec::parallel);
/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double accuracy(const AutoencoderClassifier& model, const Tensor2& x, std::span<const int> labels,
                Exec exec = Exec::parallel);

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    int version = kCheckpointVersion;
    AutoencoderClassifier model;
    TrainConfig config;
    weighting::SubjectWeights weights;
    std::optional<data::NormalizationStats> normalizer;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace otae::model
