#include "otae/tensor.hpp"

#include <cmath>

#include "otae/errors.hpp"

namespace otae {

Tensor2::Tensor2(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c)
        throw ShapeError("tensor data length " + std::to_string(data.size()) + " != " +
                         std::to_string(r) + "x" + std::to_string(c));
}

Tensor2 Tensor2::identity(std::size_t n) {
    Tensor2 t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

bool Tensor2::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor2 Tensor2::select_rows(std::span<const std::size_t> idx) const {
    Tensor2 out(idx.size(), cols);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        auto src = row(idx[k]);
        std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
}

std::string shape_str(const Tensor2& t) {
    return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

}  // namespace otae
