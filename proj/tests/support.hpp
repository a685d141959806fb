#pragma once

// Reference implementations used by the tests. They are deliberately naive
// (enumeration, pair scans, finite differences) and share no code with the
// library beyond the Tensor2 container.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "otae/tensor.hpp"

namespace otae::testing {

inline Tensor2 random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Tensor2 t(rows, cols);
    for (auto& v : t.data) v = n(rng);
    return t;
}

inline double euclid(const Tensor2& a, std::size_t i, const Tensor2& b, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.cols; ++k) {
        double d = a(i, k) - b(j, k);
        s += d * d;
    }
    return std::sqrt(s);
}

/// Optimal transport between two uniform equal-size point sets by enumerating
/// every permutation (n! matchings; a uniform assignment LP has a permutation
/// optimum by Birkhoff's theorem).
inline double brute_force_emd(const Tensor2& x, const Tensor2& y) {
    const std::size_t n = x.rows;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += euclid(x, i, y, perm[i]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(n);
}

/// Rows of `t` repeated `copies[i]` times each.
inline Tensor2 replicate_rows(const Tensor2& t, const std::vector<int>& copies) {
    std::vector<double> out;
    std::size_t rows = 0;
    for (std::size_t i = 0; i < t.rows; ++i)
        for (int c = 0; c < copies[i]; ++c) {
            out.insert(out.end(), t.row(i).begin(), t.row(i).end());
            ++rows;
        }
    return Tensor2(rows, t.cols, std::move(out));
}

/// Pair scan: smallest distance between rows with labels a and b.
inline double brute_force_min_distance(const Tensor2& pts, const std::vector<int>& labels, int a, int b) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.rows; ++i) {
        if (labels[i] != a) continue;
        for (std::size_t j = 0; j < pts.rows; ++j) {
            if (labels[j] != b) continue;
            best = std::min(best, euclid(pts, i, pts, j));
        }
    }
    return best;
}

/// Central difference of f with respect to *value.
inline double central_difference(const std::function<double()>& f, double* value, double h = 1e-5) {
    const double saved = *value;
    *value = saved + h;
    const double up = f();
    *value = saved - h;
    const double down = f();
    *value = saved;
    return (up - down) / (2.0 * h);
}

/// True when analytic and numeric agree within rel relative or abs absolute error.
inline bool gradients_agree(double analytic, double numeric, double rel = 1e-4, double abs = 1e-7) {
    const double diff = std::abs(analytic - numeric);
    if (diff <= abs) return true;
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return diff <= rel * scale;
}

inline double relative_error(double analytic, double numeric) {
    const double diff = std::abs(analytic - numeric);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return scale == 0.0 ? 0.0 : diff / scale;
}

}  // namespace otae::testing
