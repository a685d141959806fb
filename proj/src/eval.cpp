#include "otae/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "otae/errors.hpp"
#include "otae/kernels.hpp"

namespace otae::eval {

SeparationReport separation_metrics(const Tensor2& latents, std::span<const int> labels, std::size_t classes,
                                    data::SplitTag split, Exec exec) {
    if (labels.size() != latents.rows) throw ShapeError("separation_metrics: label count != rows");
    if (classes == 0) throw ConfigError("separation_metrics: zero classes");
    SeparationReport r;
    r.classes = classes;
    r.split = split;
    r.class_counts.assign(classes, 0);
    r.centroids.assign(classes, {});
    for (std::size_t i = 0; i < latents.rows; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw DataError("separation_metrics: label out of range");
        const auto c = static_cast<std::size_t>(labels[i]);
        auto& cen = r.centroids[c];
        if (cen.empty()) cen.assign(latents.cols, 0.0);
        for (std::size_t k = 0; k < latents.cols; ++k) cen[k] += latents(i, k);
        ++r.class_counts[c];
    }
    for (std::size_t c = 0; c < classes; ++c)
        for (double& v : r.centroids[c]) v /= static_cast<double>(r.class_counts[c]);

    std::vector<double> mins;
    kernels::class_min_distances(latents, labels, classes, mins, exec);

    r.centroid_distance.assign(classes * classes, std::nullopt);
    r.min_distance.assign(classes * classes, std::nullopt);
    for (std::size_t a = 0; a < classes; ++a) {
        for (std::size_t b = 0; b < classes; ++b) {
            if (r.class_counts[a] == 0 || r.class_counts[b] == 0) continue;
            if (a == b) {
                r.centroid_distance[a * classes + b] = 0.0;
                r.min_distance[a * classes + b] = 0.0;
                continue;
            }
            double s = 0.0;
            for (std::size_t k = 0; k < latents.cols; ++k) {
                const double d = r.centroids[a][k] - r.centroids[b][k];
                s += d * d;
            }
            r.centroid_distance[a * classes + b] = std::sqrt(s);
            r.min_distance[a * classes + b] = mins[a * classes + b];
        }
    }
    return r;
}

std::vector<double> symmetric_eigen(const Tensor2& a_in, Tensor2& vectors) {
    if (a_in.rows != a_in.cols) throw ShapeError("symmetric_eigen: matrix is not square");
    const std::size_t n = a_in.rows;
    Tensor2 a = a_in;
    vectors = Tensor2::identity(n);

    double scale = 0.0;
    for (double v : a.data) scale += v * v;
    const double tol = 1e-30 * std::max(scale, 1e-300);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= tol) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                // Rotation angle that zeroes a(p, q).
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = vectors(k, p), vkq = vectors(k, q);
                    vectors(k, p) = c * vkp - s * vkq;
                    vectors(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
    std::vector<double> values(n);
    Tensor2 sorted(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        values[c] = a(order[c], order[c]);
        for (std::size_t r = 0; r < n; ++r) sorted(r, c) = vectors(r, order[c]);
    }
    vectors = std::move(sorted);
    return values;
}

PcaResult pca_project(const Tensor2& x, std::size_t components) {
    if (x.rows < 2) throw ConfigError("pca_project needs at least 2 samples");
    if (components == 0 || components > x.cols)
        throw ConfigError("pca_project: " + std::to_string(components) + " components requested from " +
                          std::to_string(x.cols) + " dimensions");
    const std::size_t n = x.rows, k = x.cols;
    PcaResult r;
    r.mean.assign(k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) r.mean[j] += x(i, j);
    for (double& m : r.mean) m /= static_cast<double>(n);
    Tensor2 centered = x;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) centered(i, j) -= r.mean[j];

    Tensor2 cov;
    kernels::matmul_tn(centered, centered, cov);
    for (double& v : cov.data) v /= static_cast<double>(n - 1);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) cov(j, i) = cov(i, j) = 0.5 * (cov(i, j) + cov(j, i));
    for (std::size_t i = 0; i < k; ++i) r.total_variance += cov(i, i);

    Tensor2 vecs;
    const auto vals = symmetric_eigen(cov, vecs);
    r.basis = Tensor2(k, components);
    for (std::size_t c = 0; c < components; ++c) {
        r.explained_variance.push_back(std::max(vals[c], 0.0));
        double sign = 1.0;
        for (std::size_t j = 0; j < k; ++j)
            if (std::abs(vecs(j, c)) > 1e-12) {
                sign = vecs(j, c) > 0.0 ? 1.0 : -1.0;
                break;
            }
        for (std::size_t j = 0; j < k; ++j) r.basis(j, c) = sign * vecs(j, c);
    }
    kernels::affine(centered, r.basis, std::vector<double>(components, 0.0), r.projected);
    return r;
}

int default_jobs() {
    if (const char* env = std::getenv("OTAE_JOBS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return kernels::max_threads();
}

namespace {

FoldResult run_fold(const data::Fold& fold, const EvalConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    FoldResult r;
    r.fold = fold.index;
    r.held_out = fold.held_out;
    r.train_subjects = fold.train.subjects;
    r.train_split_id = fold.train.split_id;
    r.test_split_id = fold.test.split_id;
    try {
        for (const auto& s : fold.train.subjects)
            if (s == fold.held_out) throw InternalError("held-out subject leaked into the training split");
        const auto stats = data::fit_normalizer(fold.train);
        if (stats.fitted_on != fold.train.split_id || stats.fitted_on == fold.test.split_id)
            throw InternalError("normalizer was not fitted on this fold's training split");
        r.normalizer_fitted_on = stats.fitted_on;
        const auto train_n = data::apply_normalizer(stats, fold.train);
        const auto test_n = data::apply_normalizer(stats, fold.test);

        const auto trained = model::train(train_n, cfg.train);
        r.weights = trained.weights;

        const Tensor2 xtr = train_n.features(), xte = test_n.features();
        const auto ltr = train_n.labels(), lte = test_n.labels();
        r.accuracy = model::accuracy(trained.model, xte, lte);
        r.train_separation =
            separation_metrics(model::encode(trained.model, xtr), ltr, train_n.classes, data::SplitTag::train);
        r.test_separation =
            separation_metrics(model::encode(trained.model, xte), lte, test_n.classes, data::SplitTag::test);
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace

std::vector<FoldResult> run_loso(const data::LabeledDataset& ds, const EvalConfig& cfg) {
    cfg.train.validate();
    const auto folds = data::loso_splits(ds, cfg.loso);
    std::vector<FoldResult> results(folds.size());
    const int jobs = cfg.jobs > 0 ? cfg.jobs : default_jobs();
    const auto n = static_cast<std::ptrdiff_t>(folds.size());
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
    for (std::ptrdiff_t f = 0; f < n; ++f) {
        const auto k = static_cast<std::size_t>(f);
        results[k] = run_fold(folds[k], cfg);
    }
    return results;
}

std::optional<double> percent_change(std::optional<double> weighted, std::optional<double> baseline) {
    if (!weighted || !baseline || !(*baseline > 0.0)) return std::nullopt;
    return 100.0 * (*weighted - *baseline) / *baseline;
}

ModeSummary summarize(std::span<const FoldResult> folds) {
    ModeSummary s;
    std::vector<double> acc;
    for (const auto& f : folds)
        if (f.ok()) acc.push_back(f.accuracy);
    s.folds_ok = acc.size();
    if (acc.empty()) return s;
    s.accuracy_mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
    if (acc.size() > 1) {
        double ss = 0.0;
        for (double a : acc) ss += (a - s.accuracy_mean) * (a - s.accuracy_mean);
        s.accuracy_std = std::sqrt(ss / static_cast<double>(acc.size() - 1));
    }
    return s;
}

SplitComparison compare_split(std::span<const FoldResult> baseline, std::span<const FoldResult> weighted,
                              data::SplitTag split) {
    if (baseline.size() != weighted.size()) throw InternalError("compare_split: fold counts differ");
    SplitComparison out;
    std::size_t classes = 0;
    for (const auto& f : baseline)
        if (f.ok()) classes = std::max(classes, f.test_separation.classes);

    double cen_sum = 0.0, min_sum = 0.0;
    std::size_t cen_n = 0, min_n = 0;
    std::vector<double> pair_cen_sum, pair_min_sum;
    std::vector<std::size_t> pair_cen_n, pair_min_n;
    for (std::size_t f = 0; f < baseline.size(); ++f) {
        std::vector<PairChange> changes;
        if (baseline[f].ok() && weighted[f].ok()) {
            const auto& rb = split == data::SplitTag::train ? baseline[f].train_separation : baseline[f].test_separation;
            const auto& rw = split == data::SplitTag::train ? weighted[f].train_separation : weighted[f].test_separation;
            for (std::size_t a = 0; a < classes; ++a)
                for (std::size_t b = a + 1; b < classes; ++b)
                    changes.push_back({a, b, percent_change(rw.centroid(a, b), rb.centroid(a, b)),
                                       percent_change(rw.minimum(a, b), rb.minimum(a, b))});
        }
        if (pair_cen_sum.empty()) {
            pair_cen_sum.assign(changes.size(), 0.0);
            pair_min_sum.assign(changes.size(), 0.0);
            pair_cen_n.assign(changes.size(), 0);
            pair_min_n.assign(changes.size(), 0);
        }
        for (std::size_t p = 0; p < changes.size(); ++p) {
            if (changes[p].centroid_pct) {
                cen_sum += *changes[p].centroid_pct;
                ++cen_n;
                pair_cen_sum[p] += *changes[p].centroid_pct;
                ++pair_cen_n[p];
            }
            if (changes[p].min_pct) {
                min_sum += *changes[p].min_pct;
                ++min_n;
                pair_min_sum[p] += *changes[p].min_pct;
                ++pair_min_n[p];
            }
        }
        out.per_fold.push_back(std::move(changes));
    }
    std::size_t p = 0;
    for (std::size_t a = 0; a < classes; ++a)
        for (std::size_t b = a + 1; b < classes; ++b, ++p) {
            PairChange pc{a, b, std::nullopt, std::nullopt};
            if (p < pair_cen_n.size() && pair_cen_n[p]) pc.centroid_pct = pair_cen_sum[p] / static_cast<double>(pair_cen_n[p]);
            if (p < pair_min_n.size() && pair_min_n[p]) pc.min_pct = pair_min_sum[p] / static_cast<double>(pair_min_n[p]);
            out.mean_over_folds.push_back(pc);
        }
    if (cen_n) out.mean_centroid_pct = cen_sum / static_cast<double>(cen_n);
    if (min_n) out.mean_min_pct = min_sum / static_cast<double>(min_n);
    return out;
}

ComparisonReport compare_modes(const data::LabeledDataset& ds, const EvalConfig& cfg) {
    ComparisonReport rep;
    rep.baseline_config = cfg;
    rep.baseline_config.train.loss_mode = model::LossMode::mse_baseline;
    rep.baseline_config.train.fixed_weights.reset();
    rep.weighted_config = cfg;
    rep.weighted_config.train.loss_mode = model::LossMode::wasserstein_weighted;

    rep.baseline = run_loso(ds, rep.baseline_config);
    rep.weighted = run_loso(ds, rep.weighted_config);
    if (rep.baseline.size() != rep.weighted.size()) throw InternalError("compare_modes: fold counts differ");
    for (std::size_t f = 0; f < rep.baseline.size(); ++f) {
        const auto& b = rep.baseline[f];
        const auto& w = rep.weighted[f];
        if (b.held_out != w.held_out || b.train_split_id != w.train_split_id || b.test_split_id != w.test_split_id)
            throw InternalError("compare_modes: fold " + std::to_string(f) + " splits differ between modes");
        if (!b.ok()) rep.errors.push_back("baseline fold " + std::to_string(f) + " (" + b.held_out + "): " + b.error);
        if (!w.ok()) rep.errors.push_back("weighted fold " + std::to_string(f) + " (" + w.held_out + "): " + w.error);
    }
    rep.test = compare_split(rep.baseline, rep.weighted, data::SplitTag::test);
    rep.train = compare_split(rep.baseline, rep.weighted, data::SplitTag::train);
    rep.baseline_summary = summarize(rep.baseline);
    rep.weighted_summary = summarize(rep.weighted);
    return rep;
}

}  // namespace otae::eval
