#pragma once

// Per-subject loss scales. Each training subject gets a distance alpha between
// its own empirical distribution and the pooled group distribution; alphas are
// turned into classifier-loss regularizers lambda_i (smaller for subjects far
// from the group) plus a group regularizer lambda_g.

#include <cstdint>
#include <string>
#include <vector>

#include "otae/data.hpp"
#include "otae/kernels.hpp"
#include "otae/nn.hpp"
#include "otae/ot.hpp"

namespace otae::weighting {

enum class Mode { paper, budget };
enum class Space { input, latent };
enum class Estimator { sliced, exact };
enum class Group { include_self, exclude_self };

std::string to_string(Mode m);
std::string to_string(Space s);
std::string to_string(Estimator e);
std::string to_string(Group g);
Mode mode_from_string(const std::string& s);
Space space_from_string(const std::string& s);
Estimator estimator_from_string(const std::string& s);
Group group_from_string(const std::string& s);

struct EstimatorConfig {
    Estimator kind = Estimator::sliced;
    std::size_t n_projections = 64;
    double order = 1.0;
    Group group = Group::include_self;
    /// Exact solver: combined subject + group support.
    std::size_t exact_support_cap = ot::kDefaultSupportCap;
    /// Sliced estimator: per-distribution support (0 = unlimited).
    std::size_t sliced_support_cap = 0;
};

struct Alphas {
    std::vector<std::string> subjects;
    std::vector<double> values;
};

struct SubjectWeights {
    std::vector<std::string> subjects;
    std::vector<double> alpha;
    std::vector<double> lambda;
    double lambda_group = 1.0;
    Mode mode = Mode::budget;
    double beta = 0.5;
    /// Set when every alpha was zero and budget mode fell back to beta / S.
    bool uniform_fallback = false;
    // Provenance of the alphas.
    EstimatorConfig estimator;
    Space space = Space::input;
    std::uint64_t seed = 0;

    /// lambda_g = 1 and every lambda_i = 0: the unweighted classifier loss.
    static SubjectWeights group_only(std::vector<std::string> subjects);

    std::size_t index_of(const std::string& subject) const;
    double lambda_sum() const;
};

/// alpha_i = distance(S_i, G) for every subject of the (training) dataset.
/// With space = latent the samples are first mapped through `encoder`.
/// Subjects are evaluated independently; results come back in roster order.
Alphas compute_alphas(const data::LabeledDataset& train, Space space, const nn::MlpParams* encoder,
                      const EstimatorConfig& estimator, std::uint64_t seed, Exec exec = Exec::parallel);

/// Alphas below this total are treated as all-zero.
inline constexpr double kDegenerateAlphaSum = 1e-12;

/// paper:  lambda_i = 1 - alpha_i / |sum alpha|, lambda_g = 1 - sum lambda_i;
///         throws NormalizationError when lambda_g < 0 (any S > 2).
/// budget: the same lambda_i rescaled to sum to beta, lambda_g = 1 - beta.
SubjectWeights compute_lambdas(const Alphas& alphas, Mode mode, double beta = 0.5);

}  // namespace otae::weighting
