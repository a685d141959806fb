#include "otae/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "otae/errors.hpp"
#include "otae/rng.hpp"

namespace otae::weighting {

std::string to_string(Mode m) { return m == Mode::paper ? "paper" : "budget"; }
std::string to_string(Space s) { return s == Space::input ? "input" : "latent"; }
std::string to_string(Estimator e) { return e == Estimator::sliced ? "sliced" : "exact"; }
std::string to_string(Group g) { return g == Group::include_self ? "include_self" : "exclude_self"; }

Mode mode_from_string(const std::string& s) {
    if (s == "paper") return Mode::paper;
    if (s == "budget") return Mode::budget;
    throw ConfigError("unknown weighting mode '" + s + "' (expected paper|budget)");
}

Space space_from_string(const std::string& s) {
    if (s == "input") return Space::input;
    if (s == "latent") return Space::latent;
    throw ConfigError("unknown weighting space '" + s + "' (expected input|latent)");
}

Estimator estimator_from_string(const std::string& s) {
    if (s == "sliced") return Estimator::sliced;
    if (s == "exact") return Estimator::exact;
    throw ConfigError("unknown estimator '" + s + "' (expected sliced|exact)");
}

Group group_from_string(const std::string& s) {
    if (s == "include_self" || s == "include") return Group::include_self;
    if (s == "exclude_self" || s == "exclude") return Group::exclude_self;
    throw ConfigError("unknown group mode '" + s + "' (expected include|exclude)");
}

SubjectWeights SubjectWeights::group_only(std::vector<std::string> subjects) {
    SubjectWeights w;
    const std::size_t n = subjects.size();
    w.subjects = std::move(subjects);
    w.alpha.assign(n, 0.0);
    w.lambda.assign(n, 0.0);
    w.lambda_group = 1.0;
    return w;
}

std::size_t SubjectWeights::index_of(const std::string& subject) const {
    const auto it = std::find(subjects.begin(), subjects.end(), subject);
    if (it == subjects.end()) throw ConfigError("subject '" + subject + "' has no weight");
    return static_cast<std::size_t>(it - subjects.begin());
}

double SubjectWeights::lambda_sum() const {
    return std::accumulate(lambda.begin(), lambda.end(), 0.0);
}

namespace {

// Seeded uniform subsample without replacement; keeps original row order.
Tensor2 subsample(const Tensor2& pts, std::size_t cap, Rng& rng) {
    if (cap == 0 || pts.rows <= cap) return pts;
    std::vector<std::size_t> idx(pts.rows);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    return pts.select_rows(idx);
}

double subject_distance(const Tensor2& subject_pts, const Tensor2& group_pts, const EstimatorConfig& est,
                        std::uint64_t seed, const std::string& subject, Exec exec) {
    Rng rng(derive_seed(seed, "subsample/" + subject));
    if (est.kind == Estimator::exact) {
        const std::size_t cap = est.exact_support_cap;
        const Tensor2 s = subsample(subject_pts, std::min(subject_pts.rows, cap / 2), rng);
        const Tensor2 g = subsample(group_pts, cap - s.rows, rng);
        return ot::emd_exact(ot::EmpiricalDistribution::uniform(g), ot::EmpiricalDistribution::uniform(s), cap)
            .cost;
    }
    const Tensor2 s = subsample(subject_pts, est.sliced_support_cap, rng);
    const Tensor2 g = subsample(group_pts, est.sliced_support_cap, rng);
    // Every subject is projected on the same directions.
    return ot::sliced_wasserstein(ot::EmpiricalDistribution::uniform(g), ot::EmpiricalDistribution::uniform(s),
                                  est.n_projections, est.order, seed, exec);
}

}  // namespace

Alphas compute_alphas(const data::LabeledDataset& train, Space space, const nn::MlpParams* encoder,
                      const EstimatorConfig& estimator, std::uint64_t seed, Exec exec) {
    const std::size_t n_subj = train.subjects.size();
    if (n_subj < 2)
        throw ConfigError("subject weighting needs at least 2 training subjects, got " + std::to_string(n_subj));
    if (space == Space::latent && encoder == nullptr)
        throw ConfigError("latent-space weighting requires an encoder");
    if (estimator.kind == Estimator::sliced && estimator.n_projections == 0)
        throw ConfigError("sliced estimator needs at least one projection");

    Tensor2 pts = train.features();
    if (space == Space::latent) pts = nn::forward(*encoder, pts, exec).output;
    const auto owner = train.subject_indices();

    std::vector<Tensor2> per_subject(n_subj);
    std::vector<std::vector<std::size_t>> rows(n_subj);
    for (std::size_t i = 0; i < owner.size(); ++i) rows[owner[i]].push_back(i);
    for (std::size_t s = 0; s < n_subj; ++s) {
        if (rows[s].empty()) throw DataError("subject '" + train.subjects[s] + "' has no samples");
        per_subject[s] = pts.select_rows(rows[s]);
    }

    Alphas out;
    out.subjects = train.subjects;
    out.values.assign(n_subj, 0.0);
    std::vector<std::string> errors(n_subj);
    const auto n = static_cast<std::ptrdiff_t>(n_subj);
    const bool par = exec == Exec::parallel;
#pragma omp parallel for schedule(dynamic) if (par)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        const auto s = static_cast<std::size_t>(k);
        try {
            Tensor2 group;
            if (estimator.group == Group::include_self) {
                group = pts;
            } else {
                std::vector<std::size_t> others;
                for (std::size_t i = 0; i < owner.size(); ++i)
                    if (owner[i] != s) others.push_back(i);
                group = pts.select_rows(others);
            }
            out.values[s] = subject_distance(per_subject[s], group, estimator, seed, train.subjects[s], exec);
        } catch (const std::exception& e) {
            errors[s] = e.what();
        }
    }
    for (std::size_t s = 0; s < n_subj; ++s)
        if (!errors[s].empty()) throw NumericError("alpha for subject '" + train.subjects[s] + "': " + errors[s]);
    return out;
}

SubjectWeights compute_lambdas(const Alphas& alphas, Mode mode, double beta) {
    const std::size_t n = alphas.values.size();
    if (n == 0 || alphas.subjects.size() != n) throw ConfigError("compute_lambdas: no alphas");
    if (mode == Mode::budget && !(beta > 0.0 && beta < 1.0))
        throw ConfigError("budget beta must lie in (0, 1), got " + std::to_string(beta));
    double sum = 0.0;
    for (double a : alphas.values) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw DataError("alphas must be finite and nonnegative");
        sum += a;
    }

    SubjectWeights w;
    w.subjects = alphas.subjects;
    w.alpha = alphas.values;
    w.mode = mode;
    w.beta = beta;

    if (std::abs(sum) <= kDegenerateAlphaSum) {
        if (mode == Mode::paper)
            throw DegenerateDistanceError(
                "every subject is at distance 0 from the group, so alpha / sum(alpha) is undefined; "
                "use budget mode, which falls back to uniform lambda = beta / S");
        w.lambda.assign(n, beta / static_cast<double>(n));
        w.lambda_group = 1.0 - beta;
        w.uniform_fallback = true;
        return w;
    }

    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = 1.0 - alphas.values[i] / std::abs(sum);

    if (mode == Mode::paper) {
        w.lambda = raw;
        w.lambda_group = 1.0 - w.lambda_sum();
        if (w.lambda_group < -1e-12) {
            std::ostringstream msg;
            msg << "paper-mode normalization gives lambda_g = " << w.lambda_group << " < 0: the " << n
                << " per-subject lambdas sum to S - 1 = " << n - 1
                << ", so lambda_g + sum(lambda) = 1 forces lambda_g = 2 - S, which is only usable for S = 2;"
                   " use budget mode instead";
            throw NormalizationError(msg.str(), w.lambda_group);
        }
        return w;
    }

    if (n < 2) throw ConfigError("budget mode needs at least 2 subjects");
    const double raw_sum = std::accumulate(raw.begin(), raw.end(), 0.0);
    w.lambda.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.lambda[i] = beta * (raw[i] / raw_sum);
    w.lambda_group = 1.0 - beta;
    return w;
}

}  // namespace otae::weighting
