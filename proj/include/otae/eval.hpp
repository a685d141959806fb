#pragma once

// Leave-one-subject-out evaluation and latent-space separation metrics.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otae/data.hpp"
#include "otae/model.hpp"
#include "otae/weighting.hpp"

namespace otae::eval {

/// Class geometry of a latent matrix. Distance matrices are C x C row-major;
/// entries involving a class without samples are nullopt.
struct SeparationReport {
    std::size_t classes = 0;
    data::SplitTag split = data::SplitTag::test;
    std::vector<std::size_t> class_counts;
    std::vector<std::vector<double>> centroids;  // empty for absent classes
    std::vector<std::optional<double>> centroid_distance;
    std::vector<std::optional<double>> min_distance;

    std::optional<double> centroid(std::size_t a, std::size_t b) const { return centroid_distance[a * classes + b]; }
    std::optional<double> minimum(std::size_t a, std::size_t b) const { return min_distance[a * classes + b]; }
};

SeparationReport separation_metrics(const Tensor2& latents, std::span<const int> labels, std::size_t classes,
                                    data::SplitTag split = data::SplitTag::test, Exec exec = Exec::parallel);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order; `vectors` gets the matching columns.
std::vector<double> symmetric_eigen(const Tensor2& a, Tensor2& vectors);

struct PcaResult {
    Tensor2 projected;                        // n x m
    Tensor2 basis;                            // k x m, orthonormal columns
    std::vector<double> explained_variance;   // m, non-increasing
    std::vector<double> mean;                 // k
    double total_variance = 0.0;
};

/// Principal components from the sample covariance (denominator n - 1). Each
/// basis column is signed so its first nonzero entry is positive.
PcaResult pca_project(const Tensor2& latents, std::size_t components = 3);

struct EvalConfig {
    model::TrainConfig train;
    data::LosoOptions loso;
    int jobs = 0;  // parallel folds; 0 = OTAE_JOBS or the OpenMP default
};

/// Default fold parallelism: OTAE_JOBS if set, else the OpenMP thread count.
int default_jobs();

struct FoldResult {
    std::size_t fold = 0;
    std::string held_out;
    std::vector<std::string> train_subjects;
    double accuracy = 0.0;
    SeparationReport train_separation;
    SeparationReport test_separation;
    weighting::SubjectWeights weights;
    std::string train_split_id;
    std::string test_split_id;
    std::string normalizer_fitted_on;
    std::string error;  // nonempty if the fold failed
    double wall_seconds = 0.0;

    bool ok() const { return error.empty(); }
};

/// Per fold: fit the normalizer on the training subjects only, train, then score
/// the held-out subject and measure class separation on both latent sets.
/// A failing fold is reported through FoldResult::error; the others still run.
std::vector<FoldResult> run_loso(const data::LabeledDataset& ds, const EvalConfig& cfg);

/// 100 * (weighted - baseline) / baseline, defined only for baseline > 0.
std::optional<double> percent_change(std::optional<double> weighted, std::optional<double> baseline);

struct PairChange {
    std::size_t a = 0, b = 0;
    std::optional<double> centroid_pct;
    std::optional<double> min_pct;
};

struct SplitComparison {
    std::vector<std::vector<PairChange>> per_fold;
    std::vector<PairChange> mean_over_folds;
    std::optional<double> mean_centroid_pct;  // over every defined (fold, pair)
    std::optional<double> mean_min_pct;
};

struct ModeSummary {
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;  // sample standard deviation over folds
    std::size_t folds_ok = 0;
};

struct ComparisonReport {
    EvalConfig baseline_config;
    EvalConfig weighted_config;
    std::vector<FoldResult> baseline;
    std::vector<FoldResult> weighted;
    SplitComparison test;
    SplitComparison train;
    ModeSummary baseline_summary;
    ModeSummary weighted_summary;
    std::vector<std::string> errors;
};

ModeSummary summarize(std::span<const FoldResult> folds);
SplitComparison compare_split(std::span<const FoldResult> baseline, std::span<const FoldResult> weighted,
                              data::SplitTag split);

/// Runs LOSO twice on identical folds and seeds: once with the unweighted loss
/// and once with the subject-weighted loss from `cfg.train`.
ComparisonReport compare_modes(const data::LabeledDataset& ds, const EvalConfig& cfg);

}  // namespace otae::eval
