#include "tcwm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "tcwm/errors.hpp"

namespace tcwm {

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += " x ";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t shape_product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
    }
}

Tensor::Tensor(std::initializer_list<std::size_t> shape, std::initializer_list<Real> values)
    : Tensor(Shape(shape), std::vector<Real>(values)) {}

Tensor Tensor::vector(std::span<const Real> values) {
    return Tensor({values.size()}, std::vector<Real>(values.begin(), values.end()));
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

Tensor Tensor::slice_rows(std::size_t first, std::size_t count) const {
    if (first + count > rows()) {
        throw DimensionError("row slice out of range for " + shape_string(shape_));
    }
    const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * cols());
    return Tensor({count, cols()}, std::vector<Real>(begin, begin + static_cast<std::ptrdiff_t>(count * cols())));
}

void Tensor::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

}  // namespace tcwm
