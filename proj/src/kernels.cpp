#include "otae/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "otae/errors.hpp"

namespace otae::kernels {

namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

void check_affine(const Tensor2& x, const Tensor2& w, std::span<const double> b) {
    if (x.cols != w.rows || b.size() != w.cols)
        throw ShapeError("affine: input " + shape_str(x) + " vs weights " + shape_str(w));
}

inline void affine_row(const Tensor2& x, const Tensor2& w, std::span<const double> b, Tensor2& z,
                       std::size_t i) {
    double* zr = z.data.data() + i * z.cols;
    std::copy(b.begin(), b.end(), zr);
    const double* xr = x.data.data() + i * x.cols;
    for (std::size_t k = 0; k < x.cols; ++k) {
        const double xv = xr[k];
        const double* wr = w.data.data() + k * w.cols;
        for (std::size_t j = 0; j < w.cols; ++j) zr[j] += xv * wr[j];
    }
}

inline void matmul_tn_row(const Tensor2& a, const Tensor2& b, Tensor2& out, std::size_t i) {
    double* orow = out.data.data() + i * out.cols;
    std::fill(orow, orow + out.cols, 0.0);
    for (std::size_t n = 0; n < a.rows; ++n) {
        const double av = a(n, i);
        const double* br = b.data.data() + n * b.cols;
        for (std::size_t j = 0; j < b.cols; ++j) orow[j] += av * br[j];
    }
}

inline void matmul_nt_row(const Tensor2& a, const Tensor2& b, Tensor2& out, std::size_t i) {
    const double* ar = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
        const double* br = b.data.data() + j * b.cols;
        double s = 0.0;
        for (std::size_t k = 0; k < a.cols; ++k) s += ar[k] * br[k];
        out(i, j) = s;
    }
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        s += d * d;
    }
    return s;
}

inline void pairwise_row(const Tensor2& x, const Tensor2& y, Tensor2& out, std::size_t i) {
    for (std::size_t j = 0; j < y.rows; ++j) out(i, j) = std::sqrt(squared_distance(x.row(i), y.row(j)));
}

// Scans partners j > i and folds squared distances into `best`.
inline void class_min_row(const Tensor2& p, std::span<const int> labels, std::size_t classes,
                          std::vector<double>& best, std::size_t i) {
    const auto li = static_cast<std::size_t>(labels[i]);
    for (std::size_t j = i + 1; j < p.rows; ++j) {
        const auto lj = static_cast<std::size_t>(labels[j]);
        if (li == lj) continue;
        const double d2 = squared_distance(p.row(i), p.row(j));
        const std::size_t a = std::min(li, lj), b = std::max(li, lj);
        double& slot = best[a * classes + b];
        if (d2 < slot) slot = d2;
    }
}

void prepare_matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    if (a.rows != b.rows) throw ShapeError("matmul_tn: " + shape_str(a) + " vs " + shape_str(b));
    if (out.rows != a.cols || out.cols != b.cols) out = Tensor2(a.cols, b.cols);
}

void prepare_matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    if (a.cols != b.cols) throw ShapeError("matmul_nt: " + shape_str(a) + " vs " + shape_str(b));
    if (out.rows != a.rows || out.cols != b.rows) out = Tensor2(a.rows, b.rows);
}

void prepare_pairwise(const Tensor2& x, const Tensor2& y, Tensor2& out) {
    if (x.cols != y.cols)
        throw ShapeError("pairwise_distances: " + shape_str(x) + " vs " + shape_str(y));
    if (out.rows != x.rows || out.cols != y.rows) out = Tensor2(x.rows, y.rows);
}

void prepare_class_min(const Tensor2& p, std::span<const int> labels, std::size_t classes,
                       std::vector<double>& out) {
    if (labels.size() != p.rows) throw ShapeError("class_min_distances: label count != rows");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= classes)
            throw DataError("class_min_distances: label " + std::to_string(l) + " out of range");
    out.assign(classes * classes, std::numeric_limits<double>::infinity());
}

void finish_class_min(std::size_t classes, std::vector<double>& out) {
    for (std::size_t a = 0; a < classes; ++a) {
        out[a * classes + a] = 0.0;
        for (std::size_t b = a + 1; b < classes; ++b) {
            double& v = out[a * classes + b];
            if (std::isfinite(v)) v = std::sqrt(v);
            out[b * classes + a] = v;
        }
    }
}

}  // namespace

namespace serial {

void affine(const Tensor2& x, const Tensor2& w, std::span<const double> b, Tensor2& z) {
    check_affine(x, w, b);
    if (z.rows != x.rows || z.cols != w.cols) z = Tensor2(x.rows, w.cols);
    for (std::size_t i = 0; i < x.rows; ++i) affine_row(x, w, b, z, i);
}

void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    prepare_matmul_tn(a, b, out);
    for (std::size_t i = 0; i < a.cols; ++i) matmul_tn_row(a, b, out, i);
}

void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    prepare_matmul_nt(a, b, out);
    for (std::size_t i = 0; i < a.rows; ++i) matmul_nt_row(a, b, out, i);
}

void pairwise_distances(const Tensor2& x, const Tensor2& y, Tensor2& out) {
    prepare_pairwise(x, y, out);
    for (std::size_t i = 0; i < x.rows; ++i) pairwise_row(x, y, out, i);
}

void class_min_distances(const Tensor2& points, std::span<const int> labels, std::size_t classes,
                         std::vector<double>& out) {
    prepare_class_min(points, labels, classes, out);
    for (std::size_t i = 0; i < points.rows; ++i) class_min_row(points, labels, classes, out, i);
    finish_class_min(classes, out);
}

}  // namespace serial

namespace parallel {

void affine(const Tensor2& x, const Tensor2& w, std::span<const double> b, Tensor2& z) {
    check_affine(x, w, b);
    if (z.rows != x.rows || z.cols != w.cols) z = Tensor2(x.rows, w.cols);
    const auto n = static_cast<std::ptrdiff_t>(x.rows);
    const bool big = x.rows * x.cols * w.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t i = 0; i < n; ++i) affine_row(x, w, b, z, static_cast<std::size_t>(i));
}

void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    prepare_matmul_tn(a, b, out);
    const auto n = static_cast<std::ptrdiff_t>(a.cols);
    const bool big = a.rows * a.cols * b.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t i = 0; i < n; ++i) matmul_tn_row(a, b, out, static_cast<std::size_t>(i));
}

void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    prepare_matmul_nt(a, b, out);
    const auto n = static_cast<std::ptrdiff_t>(a.rows);
    const bool big = a.rows * a.cols * b.rows >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t i = 0; i < n; ++i) matmul_nt_row(a, b, out, static_cast<std::size_t>(i));
}

void pairwise_distances(const Tensor2& x, const Tensor2& y, Tensor2& out) {
    prepare_pairwise(x, y, out);
    const auto n = static_cast<std::ptrdiff_t>(x.rows);
    const bool big = x.rows * y.rows * x.cols >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (std::ptrdiff_t i = 0; i < n; ++i) pairwise_row(x, y, out, static_cast<std::size_t>(i));
}

void class_min_distances(const Tensor2& points, std::span<const int> labels, std::size_t classes,
                         std::vector<double>& out) {
    prepare_class_min(points, labels, classes, out);
    const auto n = static_cast<std::ptrdiff_t>(points.rows);
    const bool big = points.rows * points.rows * points.cols / 2 >= kParallelWork;
#pragma omp parallel if (big)
    {
        std::vector<double> local(out.size(), std::numeric_limits<double>::infinity());
#pragma omp for schedule(dynamic, 16)
        for (std::ptrdiff_t i = 0; i < n; ++i)
            class_min_row(points, labels, classes, local, static_cast<std::size_t>(i));
        // min is exact and order-free, so the merge needs no fixed ordering.
#pragma omp critical
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::min(out[k], local[k]);
    }
    finish_class_min(classes, out);
}

}  // namespace parallel

void affine(const Tensor2& x, const Tensor2& w, std::span<const double> b, Tensor2& z, Exec exec) {
    exec == Exec::serial ? serial::affine(x, w, b, z) : parallel::affine(x, w, b, z);
}

void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out, Exec exec) {
    exec == Exec::serial ? serial::matmul_tn(a, b, out) : parallel::matmul_tn(a, b, out);
}

void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out, Exec exec) {
    exec == Exec::serial ? serial::matmul_nt(a, b, out) : parallel::matmul_nt(a, b, out);
}

void pairwise_distances(const Tensor2& x, const Tensor2& y, Tensor2& out, Exec exec) {
    exec == Exec::serial ? serial::pairwise_distances(x, y, out)
                         : parallel::pairwise_distances(x, y, out);
}

void class_min_distances(const Tensor2& points, std::span<const int> labels, std::size_t classes,
                         std::vector<double>& out, Exec exec) {
    exec == Exec::serial ? serial::class_min_distances(points, labels, classes, out)
                         : parallel::class_min_distances(points, labels, classes, out);
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace otae::kernels
