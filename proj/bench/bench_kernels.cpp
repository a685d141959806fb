// Serial vs OpenMP timings for the dense kernels and the sliced estimator.
// Usage: bench_kernels [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "otae/kernels.hpp"
#include "otae/ot.hpp"

using namespace otae;

namespace {

Tensor2 gaussian(std::mt19937_64& rng, std::size_t r, std::size_t c) {
    std::normal_distribution<double> n;
    Tensor2 t(r, c);
    for (auto& v : t.data) v = n(rng);
    return t;
}

double best_of(int repeats, const std::function<void()>& f) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const char* name, int repeats, const std::function<void(Exec)>& f) {
    const double s = best_of(repeats, [&] { f(Exec::serial); });
    const double p = best_of(repeats, [&] { f(Exec::parallel); });
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, 1e3 * s, 1e3 * p, s / p);
}

}  // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
    std::mt19937_64 rng(1);
    std::printf("threads: %d, best of %d\n", omp_get_max_threads(), repeats);
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    const Tensor2 x = gaussian(rng, 2048, 128), w = gaussian(rng, 128, 64), y = gaussian(rng, 1024, 128);
    const std::vector<double> b(64, 0.1);
    Tensor2 out;
    std::vector<double> mins;
    std::vector<int> labels(x.rows);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);

    row("affine 2048x128 * 128x64", repeats, [&](Exec e) { kernels::affine(x, w, b, out, e); });
    row("matmul_tn 128x2048 * 2048x128", repeats, [&](Exec e) { kernels::matmul_tn(x, x, out, e); });
    row("matmul_nt 2048x128 * 128x1024", repeats, [&](Exec e) { kernels::matmul_nt(x, y, out, e); });
    row("pairwise 2048 x 1024, d=128", repeats, [&](Exec e) { kernels::pairwise_distances(x, y, out, e); });
    row("class min dist n=2048, C=3", repeats, [&](Exec e) { kernels::class_min_distances(x, labels, 3, mins, e); });

    const auto px = ot::EmpiricalDistribution::uniform(gaussian(rng, 4000, 16));
    const auto py = ot::EmpiricalDistribution::uniform(gaussian(rng, 3000, 16));
    row("sliced W1 4000 vs 3000, 256", repeats, [&](Exec e) { ot::sliced_wasserstein(px, py, 256, 1.0, 3, e); });
    return 0;
}
