#pragma once

// Dense kernels behind the network, the optimal-transport code and the
// separation metrics. Each kernel exists twice: `serial` is the plain reference
// and `parallel` distributes independent output rows over OpenMP threads. Both
// share the per-row arithmetic, so results are bit-identical for any thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "otae/tensor.hpp"

namespace otae {

enum class Exec { serial, parallel };

namespace kernels {

namespace serial {

/// z = x * w + b, with w stored input-major (in x out).
void affine(const Tensor2& x, const Tensor2& w, std::span<const double> b, Tensor2& z);
/// out = a^T * b
void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out);
/// out = a * b^T
void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out);
/// out(i, j) = ||x_i - y_j||_2
void pairwise_distances(const Tensor2& x, const Tensor2& y, Tensor2& out);
/// Smallest Euclidean distance between any two points of classes a != b.
/// `out` is C*C row-major; pairs without samples stay +inf.
void class_min_distances(const Tensor2& points, std::span<const int> labels, std::size_t classes,
                         std::vector<double>& out);

}  // namespace serial

namespace parallel {

void affine(const Tensor2& x, const Tensor2& w, std::span<const double> b, Tensor2& z);
void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out);
void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out);
void pairwise_distances(const Tensor2& x, const Tensor2& y, Tensor2& out);
void class_min_distances(const Tensor2& points, std::span<const int> labels, std::size_t classes,
                         std::vector<double>& out);

}  // namespace parallel

// Dispatch helpers used by the library code.
void affine(const Tensor2& x, const Tensor2& w, std::span<const double> b, Tensor2& z,
            Exec exec = Exec::parallel);
void matmul_tn(const Tensor2& a, const Tensor2& b, Tensor2& out, Exec exec = Exec::parallel);
void matmul_nt(const Tensor2& a, const Tensor2& b, Tensor2& out, Exec exec = Exec::parallel);
void pairwise_distances(const Tensor2& x, const Tensor2& y, Tensor2& out,
                        Exec exec = Exec::parallel);
void class_min_distances(const Tensor2& points, std::span<const int> labels, std::size_t classes,
                         std::vector<double>& out, Exec exec = Exec::parallel);

/// Number of threads the parallel kernels will use.
int max_threads();

}  // namespace kernels
}  // namespace otae
