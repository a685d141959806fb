#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "otae/tensor.hpp"

namespace otae::data {

enum class SplitTag { full, train, test };
std::string to_string(SplitTag t);

struct Sample {
    std::string subject_id;
    int label = 0;
    std::vector<double> features;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// Feature vectors tagged with subject and class. Immutable once built; splits
/// are copies carrying a split tag and an identifier.
struct LabeledDataset {
    std::vector<Sample> samples;
    std::size_t classes = 0;
    std::size_t dim = 0;
    std::vector<std::string> subjects;  // roster, first-appearance order
    SplitTag split = SplitTag::full;
    std::string split_id = "full";

    /// Builds roster and dimensions; `classes` = 0 means max label + 1.
    static LabeledDataset from_samples(std::vector<Sample> samples, std::size_t classes = 0);

    std::size_t size() const { return samples.size(); }
    std::size_t count_for(std::string_view subject) const;
    Tensor2 features() const;
    std::vector<int> labels() const;
    /// Position of each sample's subject in `subjects`.
    std::vector<std::size_t> subject_indices() const;
    /// Rows of the given subject, as a matrix.
    Tensor2 features_of(std::string_view subject) const;

    /// Copy tagged as a training split (e.g. the whole file for `train`).
    LabeledDataset as_train_split(std::string id = "train:full") const;

    /// FNV-1a over subject ids, labels and exact feature bits.
    std::uint64_t fingerprint() const;

    /// Throws DataError on ragged or non-finite samples or out-of-range labels.
    void validate() const;

    bool operator==(const LabeledDataset& o) const {
        return samples == o.samples && classes == o.classes && dim == o.dim && subjects == o.subjects;
    }
};

std::string hex64(std::uint64_t v);

/// Parses `subject_id,label,f0,...,f{d-1}` CSV. Errors name the 1-based line.
LabeledDataset parse_csv(std::string_view text, const std::string& source = "<memory>");
LabeledDataset load_csv(const std::filesystem::path& path);
/// Shortest round-trip formatting for every feature value.
void write_csv(const LabeledDataset& ds, std::ostream& out);
std::string to_csv(const LabeledDataset& ds);

inline constexpr double kStdFloor = 1e-8;

struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::string fitted_on;
    std::vector<std::string> warnings;
};

/// Per-feature mean and population standard deviation (floored at kStdFloor).
/// Only accepts a dataset tagged as a training split.
NormalizationStats fit_normalizer(const LabeledDataset& train);
LabeledDataset apply_normalizer(const NormalizationStats& stats, const LabeledDataset& ds);

struct LosoOptions {
    std::size_t fold_cap = 0;  // 0 = one fold per subject
    std::uint64_t seed = 0;
};

struct Fold {
    std::size_t index = 0;
    std::string held_out;
    LabeledDataset train;
    LabeledDataset test;
};

/// Subjects to hold out, in fold order. With a cap below the subject count the
/// choice is a seeded shuffle of the roster truncated to the cap.
std::vector<std::string> loso_held_out(const LabeledDataset& ds, const LosoOptions& opt);
std::vector<Fold> loso_splits(const LabeledDataset& ds, const LosoOptions& opt);

struct SyntheticConfig {
    std::size_t subjects = 6;
    std::size_t classes = 3;
    std::size_t dim = 12;
    std::size_t per_class = 40;      // samples per subject per class
    double class_separation = 3.0;   // norm of each shared class mean
    double subject_shift = 1.0;      // norm of each subject offset before its multiplier
    std::vector<double> multipliers; // per subject; missing entries are 1
    double noise = 1.0;
    std::uint64_t seed = 42;

    double multiplier(std::size_t subject) const {
        return subject < multipliers.size() ? multipliers[subject] : 1.0;
    }
    void validate() const;
};

/// x = class_mean(c) + subject_shift * multiplier(i) * offset_dir(i) + noise * N(0, I)
/// Class means and offset directions are seeded random directions; subjects are
/// named s0, s1, ...; samples are ordered subject, class, draw.
LabeledDataset synth_generate(const SyntheticConfig& cfg);

}  // namespace otae::data
