// Acceptance suite: one PASS/FAIL line per criterion, with its runtime and the
// measured quantities. Exit status is nonzero if any criterion fails.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "otae/errors.hpp"
#include "otae/eval.hpp"
#include "otae/ot.hpp"
#include "otae/serialize.hpp"
#include "otae/weighting.hpp"
#include "support.hpp"

using namespace otae;
using namespace otae::testing;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    std::string first_failure;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) first_failure = what;
        pass = pass && ok;
    }
};

int failures = 0;

void criterion(int id, const char* title, double budget_seconds, const std::function<void(Outcome&)>& body) {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(out);
    } catch (const std::exception& e) {
        out.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_seconds > 0.0) out.require(secs < budget_seconds, "runtime over budget");
    if (!out.pass) ++failures;
    std::printf("[%s] %2d %s (%.2fs)\n      %s\n", out.pass ? "PASS" : "FAIL", id, title, secs, out.detail.str().c_str());
    if (!out.pass) std::printf("      failed check: %s\n", out.first_failure.c_str());
    std::fflush(stdout);
}

ot::EmpiricalDistribution uniform(const Tensor2& t) { return ot::EmpiricalDistribution::uniform(t); }

double emd(const Tensor2& a, const Tensor2& b) { return ot::emd_exact(uniform(a), uniform(b)).cost; }

weighting::Alphas alphas_of(std::vector<double> v) {
    weighting::Alphas a;
    for (std::size_t i = 0; i < v.size(); ++i) a.subjects.push_back("s" + std::to_string(i));
    a.values = std::move(v);
    return a;
}

// Documented fixture for the direction-level check.
data::SyntheticConfig outlier_fixture() {
    data::SyntheticConfig c;
    c.subjects = 8;
    c.classes = 3;
    c.dim = 16;
    c.multipliers = {4.0};
    c.seed = 7;
    return c;
}

eval::EvalConfig fixture_eval() {
    eval::EvalConfig cfg;
    cfg.train.seed = 7;
    cfg.loso.seed = 7;
    return cfg;
}

void crit1(Outcome& o) {
    std::mt19937_64 rng(101);
    double worst = 0.0, worst1d = 0.0;
    int pairs = 0, one_d = 0;
    for (int t = 0; t < 120; ++t) {
        const std::size_t n = 1 + t % 8, d = 1 + (t / 8) % 3;
        const Tensor2 x = random_matrix(rng, n, d), y = random_matrix(rng, n, d, 1.5);
        worst = std::max(worst, std::abs(emd(x, y) - brute_force_emd(x, y)));
        ++pairs;
    }
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + rng() % 8, m = 1 + rng() % 8;
        const auto x = uniform(random_matrix(rng, n, 1)), y = uniform(random_matrix(rng, m, 1, 2.0));
        worst1d = std::max(worst1d, std::abs(ot::wasserstein_1d(x, y) - ot::emd_exact(x, y).cost));
        ++one_d;
    }
    o.detail << pairs << " pairs, max |emd - enumeration| = " << worst << "; " << one_d
             << " 1-D pairs, max |w1d - emd| = " << worst1d;
    o.require(worst <= 1e-9, "emd vs enumeration");
    o.require(worst1d <= 1e-9, "1-D vs emd");
}

void crit2(Outcome& o) {
    std::mt19937_64 rng(202);
    double id = 0.0, sym = 0.0, tri = -INFINITY, trans = 0.0, scal = 0.0, minv = INFINITY;
    for (int t = 0; t < 60; ++t) {
        const std::size_t n = 1 + rng() % 32, d = 1 + rng() % 3;
        const Tensor2 a = random_matrix(rng, n, d), b = random_matrix(rng, n, d, 2.0), c = random_matrix(rng, n, d);
        const double ab = emd(a, b), bc = emd(b, c), ac = emd(a, c);
        minv = std::min({minv, ab, bc, ac});
        id = std::max(id, emd(a, a));
        sym = std::max(sym, std::abs(ab - emd(b, a)));
        tri = std::max(tri, ac - ab - bc);
        Tensor2 a2 = a, b2 = b, a3 = a, b3 = b;
        std::normal_distribution<double> shift(0.0, 5.0);
        for (std::size_t k = 0; k < d; ++k) {
            const double s = shift(rng);
            for (std::size_t i = 0; i < n; ++i) {
                a2(i, k) += s;
                b2(i, k) += s;
            }
        }
        const double f = 0.1 + std::uniform_real_distribution<double>(0.0, 4.0)(rng);
        for (double& v : a3.data) v *= f;
        for (double& v : b3.data) v *= f;
        trans = std::max(trans, std::abs(emd(a2, b2) - ab));
        scal = std::max(scal, std::abs(emd(a3, b3) - f * ab));
    }
    o.detail << "60 triples: min distance " << minv << ", max d(X,X) " << id << ", max asymmetry " << sym
             << ", max triangle excess " << tri << ", translation drift " << trans << ", scaling drift " << scal;
    o.require(minv >= 0.0, "nonnegativity");
    o.require(id <= 1e-9, "identity");
    o.require(sym <= 1e-9, "symmetry");
    o.require(tri <= 1e-7, "triangle");
    o.require(trans <= 1e-9, "translation");
    o.require(scal <= 1e-9, "scaling");
}

void crit3(Outcome& o) {
    std::mt19937_64 rng(303);
    double worst1d = 0.0;
    for (int t = 0; t < 20; ++t) {
        const auto x = uniform(random_matrix(rng, 1 + rng() % 30, 1));
        const auto y = uniform(random_matrix(rng, 1 + rng() % 30, 1, 3.0));
        worst1d = std::max(worst1d, std::abs(ot::sliced_wasserstein(x, y, 1 + t, 1.0, t) - ot::wasserstein_1d(x, y)));
    }
    o.detail << "d=1 max |sliced - exact| = " << worst1d << "; d=2 sliced/exact ratios:";
    o.require(worst1d <= 1e-9, "d = 1 sliced vs exact");

    // Gaussian pairs: same law, mean shifts of 0.5 and 2, anisotropic covariance, shift + anisotropy.
    const struct {
        double shift, sx, sy;
    } fixtures[] = {{0.0, 1.0, 1.0}, {0.5, 1.0, 1.0}, {2.0, 1.0, 1.0}, {0.0, 2.0, 0.5}, {1.5, 0.5, 2.0}};
    for (const auto& f : fixtures) {
        Tensor2 a = random_matrix(rng, 64, 2), b = random_matrix(rng, 64, 2);
        for (std::size_t i = 0; i < 64; ++i) {
            b(i, 0) = f.sx * b(i, 0) + f.shift;
            b(i, 1) = f.sy * b(i, 1);
        }
        const double exact = emd(a, b);
        const double sliced = ot::sliced_wasserstein(uniform(a), uniform(b), 64, 1.0, 17);
        o.detail << " " << sliced / exact;
        o.require(std::abs(sliced - exact) <= 0.15 * exact, "d = 2 within 15% of exact");
    }
}

void crit4(Outcome& o) {
    std::mt19937_64 rng(404);
    double worst = 0.0;
    std::size_t checked = 0, bad = 0;
    const nn::Activation acts[] = {nn::Activation::tanh, nn::Activation::relu};
    for (int t = 0; t < 24; ++t) {
        model::Architecture arch;
        arch.encoder_hidden = {1 + rng() % 6};
        arch.latent_dim = 1 + rng() % 4;
        arch.classifier_hidden = {1 + rng() % 5};
        arch.hidden_activation = acts[t % 2];
        const std::size_t d = 1 + rng() % 6, C = 2 + rng() % 3, S = 2 + rng() % 3, B = 1 + rng() % 8;
        auto m = model::make_model(d, C, arch, 1000 + t);
        std::normal_distribution<double> bn(0.0, 0.3);
        for (auto* net : {&m.encoder, &m.decoder, &m.classifier})
            for (auto& l : net->layers)
                for (double& b : l.bias) b = bn(rng);
        const Tensor2 x = random_matrix(rng, B, d);
        std::vector<int> labels;
        std::vector<std::size_t> subj;
        for (std::size_t i = 0; i < B; ++i) {
            labels.push_back(static_cast<int>(rng() % C));
            subj.push_back(rng() % S);
        }
        std::vector<double> a(S);
        for (double& v : a) v = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
        const auto w = weighting::compute_lambdas(alphas_of(a), weighting::Mode::budget, 0.5);
        const double wr = 0.5 + 0.1 * t;

        const auto lg = model::composite_loss(m, x, labels, subj, w, wr);
        auto total = [&] { return model::composite_loss(m, x, labels, subj, w, wr).breakdown.total; };
        auto visit = [&](nn::MlpParams& net, const nn::MlpGrads& g) {
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                auto& layer = net.layers[l];
                auto one = [&](double* p, double an) {
                    const double fd = central_difference(total, p);
                    ++checked;
                    if (!gradients_agree(an, fd)) ++bad;
                    if (std::max(std::abs(an), std::abs(fd)) > 1e-6) worst = std::max(worst, relative_error(an, fd));
                };
                for (std::size_t k = 0; k < layer.weights.size(); ++k) one(&layer.weights.data[k], g.weights[l].data[k]);
                for (std::size_t k = 0; k < layer.bias.size(); ++k) one(&layer.bias[k], g.bias[l][k]);
            }
        };
        visit(m.encoder, lg.grads.encoder);
        visit(m.decoder, lg.grads.decoder);
        visit(m.classifier, lg.grads.classifier);
    }
    o.detail << "24 configurations, " << checked << " parameters, " << bad
             << " outside tolerance, max relative error (|g| > 1e-6) " << worst;
    o.require(bad == 0, "finite differences");
    o.require(worst < 1e-4, "max relative error");
}

void crit5(Outcome& o) {
    using weighting::Mode;
    const auto p = weighting::compute_lambdas(alphas_of({1, 3}), Mode::paper);
    o.detail << "S=2 paper lambda [" << p.lambda[0] << ", " << p.lambda[1] << "]";
    o.require(std::abs(p.lambda[0] - 0.75) <= 1e-12 && std::abs(p.lambda[1] - 0.25) <= 1e-12, "S=2 example");
    bool raised = false;
    try {
        weighting::compute_lambdas(alphas_of({1, 1, 2}), Mode::paper);
    } catch (const NormalizationError& e) {
        raised = std::abs(e.lambda_group() + 1.0) <= 1e-12;
        o.detail << "; S=3 paper error reports lambda_g = " << e.lambda_group();
    }
    o.require(raised, "S=3 normalization error with lambda_g = -1");

    std::mt19937_64 rng(505);
    double worst_sum = 0.0;
    std::size_t violations = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t S = 2 + rng() % 12;
        std::vector<double> a(S);
        for (double& v : a) v = std::uniform_real_distribution<double>(0.0, 10.0)(rng);
        const auto w = weighting::compute_lambdas(alphas_of(a), Mode::budget, 0.5);
        worst_sum = std::max(worst_sum, std::abs(w.lambda_group + w.lambda_sum() - 1.0));
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = 0; j < S; ++j)
                if (a[i] < a[j] && !(w.lambda[i] > w.lambda[j])) ++violations;
        if (S == 2 || t % 10 == 0) {
            const auto p2 = weighting::compute_lambdas(alphas_of({a[0], a[1]}), Mode::paper);
            if (a[0] < a[1] && !(p2.lambda[0] > p2.lambda[1])) ++violations;
            if (a[1] < a[0] && !(p2.lambda[1] > p2.lambda[0])) ++violations;
        }
    }
    o.detail << "; 1000 vectors: max |sum - 1| " << worst_sum << ", monotonicity violations " << violations;
    o.require(worst_sum <= 1e-9, "sum rule");
    o.require(violations == 0, "monotonicity");
}

void crit6(Outcome& o) {
    data::SyntheticConfig sc;
    sc.subjects = 4;
    sc.dim = 8;
    sc.per_class = 15;
    sc.seed = 606;
    const auto ds = data::synth_generate(sc).as_train_split();
    model::TrainConfig base;
    base.loss_mode = model::LossMode::mse_baseline;
    base.seed = 66;
    auto weighted = base;
    weighted.loss_mode = model::LossMode::wasserstein_weighted;
    weighted.fixed_weights = weighting::SubjectWeights::group_only(ds.subjects);
    std::size_t same = 0;
    for (std::size_t e = 1; e <= 10; ++e) {
        base.epochs = weighted.epochs = e;
        const auto rb = model::train(ds, base), rw = model::train(ds, weighted);
        const bool eq = rb.model == rw.model && rb.history.back().mean.total == rw.history.back().mean.total;
        same += eq;
        o.require(eq, "parameters after epoch " + std::to_string(e));
    }
    o.detail << "bit-identical parameters after " << same << " of 10 epochs";
}

void crit7(Outcome& o) {
    std::mt19937_64 rng(707);
    std::size_t mismatches = 0;
    for (int t = 0; t < 5; ++t) {
        const Tensor2 z = random_matrix(rng, 200, 2 + t);
        std::vector<int> labels(200);
        for (auto& l : labels) l = static_cast<int>(rng() % 4);
        const auto r = eval::separation_metrics(z, labels, 4);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                if (a != b && *r.minimum(a, b) != brute_force_min_distance(z, labels, a, b)) ++mismatches;
    }
    o.detail << "min-distance mismatches on 5 x n=200: " << mismatches;
    o.require(mismatches == 0, "min distance vs brute force");

    double ortho = 0.0, var = 0.0;
    for (int t = 0; t < 10; ++t) {
        const std::size_t n = 5 + rng() % 50, k = 3 + rng() % 8;
        Tensor2 x = random_matrix(rng, n, k);
        for (std::size_t i = 0; i < n; ++i) x(i, 0) *= 4.0;
        const auto p = eval::pca_project(x, 3);
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) {
                double dot = 0.0;
                for (std::size_t r = 0; r < k; ++r) dot += p.basis(r, a) * p.basis(r, b);
                ortho = std::max(ortho, std::abs(dot - (a == b ? 1.0 : 0.0)));
            }
        Eigen::MatrixXd e(n, k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) e(i, j) = x(i, j);
        const Eigen::MatrixXd c = e.rowwise() - e.colwise().mean();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.transpose() * c / static_cast<double>(n - 1));
        const Eigen::VectorXd ev = es.eigenvalues().reverse();
        for (std::size_t j = 0; j < 3; ++j) var = std::max(var, std::abs(p.explained_variance[j] - ev(j)));
    }
    o.detail << "; PCA max |B^T B - I| " << ortho << ", max variance error vs Eigen " << var;
    o.require(ortho <= 1e-9, "orthonormal basis");
    o.require(var <= 1e-8, "variances vs eigen-solver");
}

eval::ComparisonReport fixture_report;
bool fixture_ran = false;

void crit8(Outcome& o) {
    const auto ds = data::synth_generate(outlier_fixture());
    fixture_report = eval::compare_modes(ds, fixture_eval());
    fixture_ran = true;
    const auto& t = fixture_report.test;
    o.require(fixture_report.errors.empty(), "all folds completed");
    o.require(t.mean_centroid_pct.has_value() && t.mean_min_pct.has_value(), "percent changes defined");
    const double cen = t.mean_centroid_pct.value_or(NAN), mn = t.mean_min_pct.value_or(NAN);
    o.detail << "S=8 C=3 d=16 s0 x4 seed 7: mean test centroid change " << cen << "%, min-distance change " << mn
             << "%, accuracy baseline " << fixture_report.baseline_summary.accuracy_mean << " weighted "
             << fixture_report.weighted_summary.accuracy_mean;
    o.require(cen > 0.0, "centroid change > 0");
    o.require(mn > 0.0, "min-distance change > 0");
    o.require(cen >= 5.0, "centroid change >= 5%");
}

void crit9(Outcome& o) {
    const auto ds = data::synth_generate(outlier_fixture());
    auto cfg = fixture_eval();
    cfg.jobs = 1;
    if (!fixture_ran) fixture_report = eval::compare_modes(ds, fixture_eval());
    const auto again = eval::compare_modes(ds, cfg);
    const auto a = serialize::strip_timings(serialize::comparison_report(fixture_report));
    const auto b = serialize::strip_timings(serialize::comparison_report(again));
    o.detail << "report sizes " << a.dump().size() << " / " << b.dump().size() << " bytes (parallel vs one job)";
    o.require(a == b, "identical reports modulo timings");
}

void crit10(Outcome& o) {
    data::SyntheticConfig sc;
    sc.subjects = 15;
    sc.dim = 5;
    sc.per_class = 4;
    sc.seed = 1010;
    const auto ds = data::synth_generate(sc);
    std::size_t checked = 0;
    for (std::size_t cap : {0u, 10u}) {
        const auto folds = data::loso_splits(ds, {cap, 10});
        std::multiset<std::string> held;
        for (const auto& f : folds) {
            held.insert(f.held_out);
            for (const auto& s : f.train.subjects) o.require(s != f.held_out, "disjoint subjects");
            o.require(f.test.subjects == std::vector<std::string>{f.held_out}, "test is the held-out subject");
            o.require(f.train.size() + f.test.size() == ds.size(), "no sample dropped or duplicated");
        }
        o.require(held.size() == (cap ? cap : 15), "fold count");
        o.require(std::set<std::string>(held.begin(), held.end()).size() == held.size(), "each held out once");
        checked += folds.size();
    }

    eval::EvalConfig cfg;
    cfg.train.epochs = 2;
    cfg.loso = {10, 10};
    const auto results = eval::run_loso(ds, cfg);
    for (const auto& f : results) {
        o.require(f.ok(), "fold ran");
        o.require(f.normalizer_fitted_on == f.train_split_id, "normalizer fitted on train split");
        o.require(f.normalizer_fitted_on.find(":train:") != std::string::npos, "train split id");
        o.require(std::find(f.train_subjects.begin(), f.train_subjects.end(), f.held_out) == f.train_subjects.end(),
                  "held-out subject absent from training");
    }
    o.detail << checked << " folds checked (no cap, cap 10); " << results.size()
             << " trained folds with normalizer fitted on their training split";
}

}  // namespace

int main() {
    criterion(1, "OT oracle equivalence", 60, crit1);
    criterion(2, "OT metric axioms", 60, crit2);
    criterion(3, "Sliced estimator sanity", 0, crit3);
    criterion(4, "Gradient correctness", 120, crit4);
    criterion(5, "Weighting algebra", 0, crit5);
    criterion(6, "Baseline equivalence", 0, crit6);
    criterion(7, "Separation-metric oracles", 0, crit7);
    criterion(8, "Direction-level reproduction on the outlier fixture", 900, crit8);
    criterion(9, "End-to-end determinism", 0, crit9);
    criterion(10, "LOSO protocol", 0, crit10);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
