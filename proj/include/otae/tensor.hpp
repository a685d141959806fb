#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace otae {

/// Dense row-major matrix of doubles. Rows are samples throughout the code base.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Tensor2(std::size_t r, std::size_t c, std::vector<double> values);

    static Tensor2 identity(std::size_t n);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;

    /// Copies the listed rows, in order, into a new tensor.
    Tensor2 select_rows(std::span<const std::size_t> idx) const;

    friend bool operator==(const Tensor2&, const Tensor2&) = default;
};

std::string shape_str(const Tensor2& t);

}  // namespace otae
