#pragma once

// Distances between finite weighted point sets: exact 1-D Wasserstein, the
// sliced estimator for d > 1, and an exact Kantorovich (EMD) solver used as the
// reference on small supports.

#include <cstdint>
#include <span>
#include <vector>

#include "otae/kernels.hpp"
#include "otae/tensor.hpp"

namespace otae::ot {

/// A discrete probability measure: n points in R^d carrying nonnegative weights
/// that sum to one.
struct EmpiricalDistribution {
    Tensor2 points;
    std::vector<double> weights;

    static EmpiricalDistribution uniform(Tensor2 points);
    static EmpiricalDistribution weighted(Tensor2 points, std::vector<double> weights);

    std::size_t size() const { return points.rows; }
    std::size_t dim() const { return points.cols; }
    bool is_uniform() const;

    /// Throws DataError if empty, non-finite, negative or not summing to 1 (1e-9).
    void validate() const;
};

struct TransportEntry {
    std::size_t source = 0;
    std::size_t target = 0;
    double mass = 0.0;
};

struct TransportPlan {
    std::vector<TransportEntry> entries;

    double total_mass() const;
};

/// Throws InternalError unless every mass is nonnegative and both marginals
/// match the given weights within `tol`.
void verify_plan(const TransportPlan& plan, std::span<const double> source_weights,
                 std::span<const double> target_weights, double tol = 1e-9);

/// Exact W_p between two weighted 1-D samples by walking both sorted supports
/// and moving mass between the current atoms (quantile matching).
double wasserstein_1d(std::span<const double> xs, std::span<const double> xw,
                      std::span<const double> ys, std::span<const double> yw, double p = 1.0);
double wasserstein_1d(const EmpiricalDistribution& x, const EmpiricalDistribution& y, double p = 1.0);

/// `count` unit vectors in R^dim, obtained by normalizing seeded standard-normal
/// draws (uniform on the sphere). Stored one direction per row.
Tensor2 random_directions(std::size_t count, std::size_t dim, std::uint64_t seed);

/// Mean over seeded directions of wasserstein_1d between the projected
/// measures. Directions are evaluated independently and summed in index order.
double sliced_wasserstein(const EmpiricalDistribution& x, const EmpiricalDistribution& y,
                          std::size_t n_projections, double p, std::uint64_t seed,
                          Exec exec = Exec::parallel);

inline constexpr std::size_t kDefaultSupportCap = 512;

struct EmdResult {
    double cost = 0.0;
    TransportPlan plan;
};

/// Optimal transport cost with Euclidean ground cost. Equal-size uniform inputs
/// go through the assignment solver, everything else through min-cost flow on
/// the bipartite transport graph. The plan's marginals are checked before return.
/// Throws CapacityError if x.size() + y.size() > support_cap.
EmdResult emd_exact(const EmpiricalDistribution& x, const EmpiricalDistribution& y,
                    std::size_t support_cap = kDefaultSupportCap);

struct Assignment {
    std::vector<std::size_t> target_of;  // row i is matched to column target_of[i]
    double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method with
/// potentials, O(n^3)).
Assignment solve_assignment(const Tensor2& cost);

/// Transportation problem: ship `supply` onto `demand` at minimum total cost.
/// Successive shortest paths with Dijkstra on reduced costs.
EmdResult solve_transport(std::span<const double> supply, std::span<const double> demand,
                          const Tensor2& cost);

}  // namespace otae::ot
