#include "otae/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "otae/errors.hpp"
#include "otae/rng.hpp"

namespace otae::data {

std::string to_string(SplitTag t) {
    switch (t) {
    case SplitTag::full: return "full";
    case SplitTag::train: return "train";
    case SplitTag::test: return "test";
    }
    return "?";
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

LabeledDataset LabeledDataset::from_samples(std::vector<Sample> samples, std::size_t classes) {
    LabeledDataset ds;
    ds.samples = std::move(samples);
    int max_label = -1;
    std::unordered_map<std::string, bool> seen;
    for (const auto& s : ds.samples) {
        max_label = std::max(max_label, s.label);
        if (seen.emplace(s.subject_id, true).second) ds.subjects.push_back(s.subject_id);
    }
    ds.dim = ds.samples.empty() ? 0 : ds.samples.front().features.size();
    ds.classes = classes ? classes : static_cast<std::size_t>(max_label + 1);
    ds.validate();
    return ds;
}

std::size_t LabeledDataset::count_for(std::string_view subject) const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.subject_id == subject; }));
}

Tensor2 LabeledDataset::features() const {
    Tensor2 t(samples.size(), dim);
    for (std::size_t i = 0; i < samples.size(); ++i)
        std::copy(samples[i].features.begin(), samples[i].features.end(), t.row(i).begin());
    return t;
}

std::vector<int> LabeledDataset::labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

std::vector<std::size_t> LabeledDataset::subject_indices() const {
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t k = 0; k < subjects.size(); ++k) pos[subjects[k]] = k;
    std::vector<std::size_t> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(pos.at(s.subject_id));
    return out;
}

Tensor2 LabeledDataset::features_of(std::string_view subject) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].subject_id == subject) rows.push_back(i);
    Tensor2 t(rows.size(), dim);
    for (std::size_t k = 0; k < rows.size(); ++k)
        std::copy(samples[rows[k]].features.begin(), samples[rows[k]].features.end(), t.row(k).begin());
    return t;
}

LabeledDataset LabeledDataset::as_train_split(std::string id) const {
    LabeledDataset ds = *this;
    ds.split = SplitTag::train;
    ds.split_id = std::move(id);
    return ds;
}

std::uint64_t LabeledDataset::fingerprint() const {
    std::uint64_t h = fnv1a64("");
    for (const auto& s : samples) {
        h = fnv1a64(s.subject_id, h);
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&s.label), sizeof s.label), h);
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(s.features.data()),
                                     s.features.size() * sizeof(double)),
                    h);
    }
    return h;
}

void LabeledDataset::validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.features.size() != dim)
            throw DataError("sample " + std::to_string(i) + " has " + std::to_string(s.features.size()) +
                            " features, expected " + std::to_string(dim));
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= classes)
            throw DataError("sample " + std::to_string(i) + " has label " + std::to_string(s.label) +
                            " outside [0, " + std::to_string(classes) + ")");
        for (double v : s.features)
            if (!std::isfinite(v)) throw DataError("sample " + std::to_string(i) + " has a non-finite feature");
    }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
    throw DataError(source + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

LabeledDataset parse_csv(std::string_view text, const std::string& source) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::size_t n_fields = 0;
    std::vector<Sample> samples;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty()) {
            if (pos > text.size()) break;
            continue;
        }
        const auto fields = split_fields(line);
        if (n_fields == 0) {
            if (fields.size() < 3 || trim(fields[0]) != "subject_id" || trim(fields[1]) != "label")
                fail(source, line_no, "header must be subject_id,label,f0,...");
            n_fields = fields.size();
            continue;
        }
        if (fields.size() != n_fields)
            fail(source, line_no,
                 "expected " + std::to_string(n_fields) + " fields, got " + std::to_string(fields.size()));
        Sample s;
        s.subject_id = std::string(trim(fields[0]));
        if (s.subject_id.empty()) fail(source, line_no, "empty subject_id");
        const auto lab = trim(fields[1]);
        auto [lp, lec] = std::from_chars(lab.data(), lab.data() + lab.size(), s.label);
        if (lec != std::errc() || lp != lab.data() + lab.size())
            fail(source, line_no, "label '" + std::string(lab) + "' is not a base-10 integer");
        if (s.label < 0) fail(source, line_no, "negative label " + std::to_string(s.label));
        s.features.resize(n_fields - 2);
        for (std::size_t k = 2; k < n_fields; ++k) {
            auto f = trim(fields[k]);
            if (!f.empty() && f.front() == '+') f.remove_prefix(1);
            double v = 0.0;
            auto [fp, fec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || fec != std::errc() || fp != f.data() + f.size() || !std::isfinite(v))
                fail(source, line_no, "feature f" + std::to_string(k - 2) + " '" + std::string(f) +
                                          "' is not a finite number");
            s.features[k - 2] = v;
        }
        samples.push_back(std::move(s));
    }
    if (n_fields == 0) throw DataError(source + ": missing header");
    if (samples.empty()) throw DataError(source + ": no samples");
    return LabeledDataset::from_samples(std::move(samples));
}

LabeledDataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path.string());
}

void write_csv(const LabeledDataset& ds, std::ostream& out) {
    out << "subject_id,label";
    for (std::size_t k = 0; k < ds.dim; ++k) out << ",f" << k;
    out << '\n';
    char buf[64];
    for (const auto& s : ds.samples) {
        out << s.subject_id << ',' << s.label;
        for (double v : s.features) {
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
            out << ',' << std::string_view(buf, static_cast<std::size_t>(p - buf));
        }
        out << '\n';
    }
}

std::string to_csv(const LabeledDataset& ds) {
    std::ostringstream os;
    write_csv(ds, os);
    return os.str();
}

NormalizationStats fit_normalizer(const LabeledDataset& train) {
    if (train.split != SplitTag::train)
        throw ConfigError("normalizer may only be fitted on a training split (got '" + to_string(train.split) +
                          "' / " + train.split_id + ")");
    if (train.samples.empty()) throw DataError("cannot fit a normalizer on an empty split");
    NormalizationStats st;
    st.fitted_on = train.split_id;
    st.mean.assign(train.dim, 0.0);
    st.stddev.assign(train.dim, 0.0);
    const double n = static_cast<double>(train.size());
    for (std::size_t k = 0; k < train.dim; ++k) {
        // Shifted by the first value so a constant column has an exact mean.
        const double ref = train.samples.front().features[k];
        double s = 0.0;
        for (const auto& smp : train.samples) s += smp.features[k] - ref;
        const double mean = ref + s / n;
        double ss = 0.0;
        for (const auto& smp : train.samples) {
            const double d = smp.features[k] - mean;
            ss += d * d;
        }
        double sd = std::sqrt(ss / n);
        if (sd < kStdFloor) {
            st.warnings.push_back("feature f" + std::to_string(k) + " has (near) zero variance; std clamped to " +
                                  std::to_string(kStdFloor));
            sd = kStdFloor;
        }
        st.mean[k] = mean;
        st.stddev[k] = sd;
    }
    return st;
}

LabeledDataset apply_normalizer(const NormalizationStats& stats, const LabeledDataset& ds) {
    if (stats.mean.size() != ds.dim || stats.stddev.size() != ds.dim)
        throw ShapeError("normalizer has " + std::to_string(stats.mean.size()) + " features, dataset has " +
                         std::to_string(ds.dim));
    LabeledDataset out = ds;
    for (auto& s : out.samples)
        for (std::size_t k = 0; k < ds.dim; ++k) s.features[k] = (s.features[k] - stats.mean[k]) / stats.stddev[k];
    return out;
}

std::vector<std::string> loso_held_out(const LabeledDataset& ds, const LosoOptions& opt) {
    if (ds.subjects.size() < 2)
        throw ConfigError("leave-one-subject-out needs at least 2 subjects, got " + std::to_string(ds.subjects.size()));
    std::vector<std::string> order = ds.subjects;
    if (opt.fold_cap > 0 && opt.fold_cap < order.size()) {
        Rng rng(derive_seed(opt.seed, "loso"));
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(opt.fold_cap);
    }
    return order;
}

std::vector<Fold> loso_splits(const LabeledDataset& ds, const LosoOptions& opt) {
    const auto held = loso_held_out(ds, opt);
    std::vector<Fold> folds;
    folds.reserve(held.size());
    for (std::size_t f = 0; f < held.size(); ++f) {
        std::vector<Sample> tr, te;
        for (const auto& s : ds.samples) (s.subject_id == held[f] ? te : tr).push_back(s);
        Fold fold;
        fold.index = f;
        fold.held_out = held[f];
        fold.train = LabeledDataset::from_samples(std::move(tr), ds.classes);
        fold.test = LabeledDataset::from_samples(std::move(te), ds.classes);
        fold.train.split = SplitTag::train;
        fold.test.split = SplitTag::test;
        fold.train.split_id = "fold" + std::to_string(f) + ":train:" + hex64(fold.train.fingerprint());
        fold.test.split_id = "fold" + std::to_string(f) + ":test:" + hex64(fold.test.fingerprint());
        folds.push_back(std::move(fold));
    }
    return folds;
}

void SyntheticConfig::validate() const {
    if (subjects == 0 || classes == 0 || dim == 0 || per_class == 0)
        throw ConfigError("synthetic config: subjects, classes, dim and per_class must all be >= 1");
    if (class_separation < 0.0 || subject_shift < 0.0 || noise < 0.0)
        throw ConfigError("synthetic config: magnitudes must be >= 0");
    for (double m : multipliers)
        if (!(m >= 0.0)) throw ConfigError("synthetic config: multipliers must be >= 0");
    if (multipliers.size() > subjects) throw ConfigError("synthetic config: more multipliers than subjects");
}

LabeledDataset synth_generate(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "synth"));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto unit_vector = [&] {
        std::vector<double> v(cfg.dim);
        double norm = 0.0;
        while (norm == 0.0) {
            norm = 0.0;
            for (double& x : v) {
                x = normal(rng);
                norm += x * x;
            }
        }
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        return v;
    };
    std::vector<std::vector<double>> class_means(cfg.classes), offsets(cfg.subjects);
    for (auto& m : class_means) {
        m = unit_vector();
        for (double& x : m) x *= cfg.class_separation;
    }
    for (auto& o : offsets) o = unit_vector();

    std::vector<Sample> samples;
    samples.reserve(cfg.subjects * cfg.classes * cfg.per_class);
    for (std::size_t i = 0; i < cfg.subjects; ++i) {
        const double shift = cfg.subject_shift * cfg.multiplier(i);
        for (std::size_t c = 0; c < cfg.classes; ++c) {
            for (std::size_t k = 0; k < cfg.per_class; ++k) {
                Sample s{"s" + std::to_string(i), static_cast<int>(c), std::vector<double>(cfg.dim)};
                for (std::size_t f = 0; f < cfg.dim; ++f) {
                    const double eps = normal(rng);
                    s.features[f] = class_means[c][f] + shift * offsets[i][f] + cfg.noise * eps;
                }
                samples.push_back(std::move(s));
            }
        }
    }
    return LabeledDataset::from_samples(std::move(samples), cfg.classes);
}

}  // namespace otae::data
