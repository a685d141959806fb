#include "otae/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "otae/errors.hpp"
#include "otae/rng.hpp"

namespace otae::ot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Residual masses at or below this are treated as exhausted.
constexpr double kMassEps = 1e-15;

std::vector<std::size_t> argsort(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return idx;
}

double ground_cost(double a, double b, double p) {
    const double d = std::abs(a - b);
    return p == 1.0 ? d : std::pow(d, p);
}

}  // namespace

EmpiricalDistribution EmpiricalDistribution::uniform(Tensor2 points) {
    const std::size_t n = points.rows;
    if (n == 0) throw DataError("empirical distribution needs at least one point");
    return {std::move(points), std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

EmpiricalDistribution EmpiricalDistribution::weighted(Tensor2 points, std::vector<double> weights) {
    EmpiricalDistribution d{std::move(points), std::move(weights)};
    d.validate();
    return d;
}

bool EmpiricalDistribution::is_uniform() const {
    const double u = 1.0 / static_cast<double>(weights.size());
    return std::all_of(weights.begin(), weights.end(), [&](double w) { return std::abs(w - u) <= 1e-15; });
}

void EmpiricalDistribution::validate() const {
    if (points.rows == 0) throw DataError("empirical distribution is empty");
    if (weights.size() != points.rows)
        throw ShapeError("empirical distribution: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(points.rows) + " points");
    if (!points.all_finite()) throw DataError("empirical distribution has non-finite coordinates");
    double s = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("empirical distribution has a negative weight");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw DataError("empirical distribution weights sum to " + std::to_string(s) + ", expected 1");
}

double TransportPlan::total_mass() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.mass;
    return s;
}

void verify_plan(const TransportPlan& plan, std::span<const double> source_weights,
                 std::span<const double> target_weights, double tol) {
    std::vector<double> rows(source_weights.size(), 0.0), cols(target_weights.size(), 0.0);
    for (const auto& e : plan.entries) {
        if (e.source >= rows.size() || e.target >= cols.size())
            throw InternalError("transport plan index out of range");
        if (!(e.mass >= 0.0)) throw InternalError("transport plan has negative mass");
        rows[e.source] += e.mass;
        cols[e.target] += e.mass;
    }
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (std::abs(rows[i] - source_weights[i]) > tol)
            throw InternalError("transport plan row marginal " + std::to_string(i) + " is off by " +
                                std::to_string(rows[i] - source_weights[i]));
    for (std::size_t j = 0; j < cols.size(); ++j)
        if (std::abs(cols[j] - target_weights[j]) > tol)
            throw InternalError("transport plan column marginal " + std::to_string(j) + " is off by " +
                                std::to_string(cols[j] - target_weights[j]));
}

double wasserstein_1d(std::span<const double> xs, std::span<const double> xw,
                      std::span<const double> ys, std::span<const double> yw, double p) {
    if (xs.empty() || ys.empty()) throw DataError("wasserstein_1d: empty support");
    if (xs.size() != xw.size() || ys.size() != yw.size()) throw ShapeError("wasserstein_1d: weight count");
    if (!(p >= 1.0)) throw ConfigError("wasserstein_1d: order p must be >= 1");
    const auto ix = argsort(xs);
    const auto iy = argsort(ys);
    std::size_t i = 0, j = 0;
    double rx = xw[ix[0]], ry = yw[iy[0]];
    double total = 0.0;
    while (i < xs.size() && j < ys.size()) {
        const double m = std::min(rx, ry);
        if (m > 0.0) total += m * ground_cost(xs[ix[i]], ys[iy[j]], p);
        rx -= m;
        ry -= m;
        if (rx <= kMassEps && ++i < xs.size()) rx = xw[ix[i]];
        if (ry <= kMassEps && ++j < ys.size()) ry = yw[iy[j]];
    }
    return p == 1.0 ? total : std::pow(total, 1.0 / p);
}

double wasserstein_1d(const EmpiricalDistribution& x, const EmpiricalDistribution& y, double p) {
    x.validate();
    y.validate();
    if (x.dim() != 1 || y.dim() != 1)
        throw ShapeError("wasserstein_1d needs one-dimensional inputs, got d = " + std::to_string(x.dim()) +
                         " and " + std::to_string(y.dim()));
    return wasserstein_1d(x.points.data, x.weights, y.points.data, y.weights, p);
}

Tensor2 random_directions(std::size_t count, std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw ShapeError("random_directions: zero dimension");
    Rng rng(derive_seed(seed, "projections"));
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor2 dirs(count, dim);
    for (std::size_t k = 0; k < count; ++k) {
        auto r = dirs.row(k);
        double norm = 0.0;
        // A zero draw has probability 0 but would not normalize; redraw.
        while (norm == 0.0) {
            norm = 0.0;
            for (double& v : r) {
                v = normal(rng);
                norm += v * v;
            }
        }
        norm = std::sqrt(norm);
        for (double& v : r) v /= norm;
    }
    return dirs;
}

double sliced_wasserstein(const EmpiricalDistribution& x, const EmpiricalDistribution& y,
                          std::size_t n_projections, double p, std::uint64_t seed, Exec exec) {
    x.validate();
    y.validate();
    if (x.dim() != y.dim())
        throw ShapeError("sliced_wasserstein: dimensions " + std::to_string(x.dim()) + " and " +
                         std::to_string(y.dim()) + " differ");
    if (n_projections == 0) throw ConfigError("sliced_wasserstein: need at least one projection");
    const Tensor2 dirs = random_directions(n_projections, x.dim(), seed);

    // Projections stored direction-major so each slice is contiguous.
    Tensor2 px, py;
    kernels::matmul_nt(dirs, x.points, px, exec);
    kernels::matmul_nt(dirs, y.points, py, exec);

    std::vector<double> per_dir(n_projections, 0.0);
    const auto n = static_cast<std::ptrdiff_t>(n_projections);
    const bool par = exec == Exec::parallel && n > 1;
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        per_dir[kk] = wasserstein_1d(px.row(kk), x.weights, py.row(kk), y.weights, p);
    }
    double sum = 0.0;
    for (double v : per_dir) sum += v;
    return sum / static_cast<double>(n_projections);
}

Assignment solve_assignment(const Tensor2& cost) {
    if (cost.rows != cost.cols) throw ShapeError("solve_assignment needs a square matrix");
    const std::size_t n = cost.rows;
    // 1-based potentials formulation; column 0 is the virtual start.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Assignment a;
    a.target_of.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) a.target_of[match[j] - 1] = j - 1;
    for (std::size_t i = 0; i < n; ++i) a.total_cost += cost(i, a.target_of[i]);
    return a;
}

EmdResult solve_transport(std::span<const double> supply, std::span<const double> demand,
                          const Tensor2& cost) {
    const std::size_t n = supply.size(), m = demand.size();
    if (cost.rows != n || cost.cols != m) throw ShapeError("solve_transport: cost matrix shape");
    const std::size_t nodes = n + m;  // sources [0, n), sinks [n, n + m)

    std::vector<double> sup(supply.begin(), supply.end()), dem(demand.begin(), demand.end());
    Tensor2 flow(n, m);
    std::vector<double> pot(nodes, 0.0), dist(nodes);
    std::vector<std::size_t> parent(nodes);
    std::vector<char> done(nodes);
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

    auto remaining = [](const std::vector<double>& v) {
        return std::any_of(v.begin(), v.end(), [](double x) { return x > kMassEps; });
    };

    while (remaining(sup) && remaining(dem)) {
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(parent.begin(), parent.end(), kNone);
        std::fill(done.begin(), done.end(), 0);
        for (std::size_t i = 0; i < n; ++i)
            if (sup[i] > kMassEps) dist[i] = 0.0;

        // Dense Dijkstra over the residual graph with reduced costs.
        for (;;) {
            std::size_t u = kNone;
            double best = kInf;
            for (std::size_t k = 0; k < nodes; ++k)
                if (!done[k] && dist[k] < best) {
                    best = dist[k];
                    u = k;
                }
            if (u == kNone) break;
            done[u] = 1;
            if (u < n) {
                for (std::size_t j = 0; j < m; ++j) {
                    const std::size_t t = n + j;
                    if (done[t]) continue;
                    const double rc = std::max(0.0, cost(u, j) + pot[u] - pot[t]);
                    if (dist[u] + rc < dist[t]) {
                        dist[t] = dist[u] + rc;
                        parent[t] = u;
                    }
                }
            } else {
                const std::size_t j = u - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (done[i] || flow(i, j) <= kMassEps) continue;
                    const double rc = std::max(0.0, -cost(i, j) + pot[u] - pot[i]);
                    if (dist[u] + rc < dist[i]) {
                        dist[i] = dist[u] + rc;
                        parent[i] = u;
                    }
                }
            }
        }

        std::size_t sink = kNone;
        for (std::size_t j = 0; j < m; ++j)
            if (dem[j] > kMassEps && dist[n + j] < kInf && (sink == kNone || dist[n + j] < dist[sink]))
                sink = n + j;
        if (sink == kNone) throw InternalError("solve_transport: no augmenting path");

        const double cap = dist[sink];
        for (std::size_t k = 0; k < nodes; ++k)
            if (dist[k] < kInf) pot[k] += std::min(dist[k], cap);

        // Bottleneck along the path back to its source.
        double delta = dem[sink - n];
        std::size_t v = sink;
        while (parent[v] != kNone) {
            const std::size_t u = parent[v];
            if (u >= n) delta = std::min(delta, flow(v, u - n));  // reverse arc sink u -> source v
            v = u;
        }
        const std::size_t source = v;
        delta = std::min(delta, sup[source]);

        v = sink;
        while (parent[v] != kNone) {
            const std::size_t u = parent[v];
            if (u < n) {
                flow(u, v - n) += delta;
            } else {
                double& f = flow(v, u - n);
                f -= delta;
                if (f <= kMassEps) f = 0.0;
            }
            v = u;
        }
        sup[source] -= delta;
        dem[sink - n] -= delta;
    }

    EmdResult r;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (flow(i, j) > 0.0) {
                r.plan.entries.push_back({i, j, flow(i, j)});
                r.cost += flow(i, j) * cost(i, j);
            }
    return r;
}

EmdResult emd_exact(const EmpiricalDistribution& x, const EmpiricalDistribution& y, std::size_t support_cap) {
    x.validate();
    y.validate();
    if (x.dim() != y.dim())
        throw ShapeError("emd_exact: dimensions " + std::to_string(x.dim()) + " and " +
                         std::to_string(y.dim()) + " differ");
    if (x.size() + y.size() > support_cap)
        throw CapacityError("emd_exact: combined support " + std::to_string(x.size() + y.size()) +
                            " exceeds the cap of " + std::to_string(support_cap) +
                            " points; subsample the inputs first");
    Tensor2 cost;
    kernels::pairwise_distances(x.points, y.points, cost);

    EmdResult r;
    if (x.size() == y.size() && x.is_uniform() && y.is_uniform()) {
        const auto a = solve_assignment(cost);
        const double mass = 1.0 / static_cast<double>(x.size());
        r.cost = a.total_cost * mass;
        for (std::size_t i = 0; i < x.size(); ++i) r.plan.entries.push_back({i, a.target_of[i], mass});
    } else {
        r = solve_transport(x.weights, y.weights, cost);
    }
    verify_plan(r.plan, x.weights, y.weights);
    return r;
}

}  // namespace otae::ot
