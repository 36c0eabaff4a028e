#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tcwm {

#ifndef TCWM_REAL
#define TCWM_REAL float
#endif
using Real = TCWM_REAL;

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_product(const Shape& shape);

/// Dense row-major array. Every operation in the library views a tensor as a
/// matrix of `rows() x cols()`, where `cols()` is the last dimension and the
/// leading dimensions are folded into batch rows.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Real fill = Real(0));
    Tensor(Shape shape, std::vector<Real> data);
    Tensor(std::initializer_list<std::size_t> shape, std::initializer_list<Real> values);

    static Tensor matrix(std::size_t rows, std::size_t cols, Real fill = Real(0)) {
        return Tensor({rows, cols}, fill);
    }
    static Tensor vector(std::span<const Real> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
    std::size_t rows() const noexcept { return cols() == 0 ? 0 : data_.size() / cols(); }

    Real* data() noexcept { return data_.data(); }
    const Real* data() const noexcept { return data_.data(); }
    // Views into a temporary would dangle, so rvalues only hand out a copy.
    std::span<Real> values() & noexcept { return data_; }
    std::span<const Real> values() const& noexcept { return data_; }
    std::span<Real> values() && = delete;
    std::vector<Real>& storage() & noexcept { return data_; }
    const std::vector<Real>& storage() const& noexcept { return data_; }
    std::vector<Real> storage() && noexcept { return std::move(data_); }

    std::span<Real> row(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }
    std::span<const Real> row(std::size_t r) const noexcept { return {data_.data() + r * cols(), cols()}; }

    Real& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    Real operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }
    Real& operator[](std::size_t i) noexcept { return data_[i]; }
    Real operator[](std::size_t i) const noexcept { return data_[i]; }

    // Same data, new shape; product must match.
    Tensor reshaped(Shape shape) const;
    // Rows [first, first + count) of the matrix view.
    Tensor slice_rows(std::size_t first, std::size_t count) const;

    void fill(Real value);
    bool all_finite() const noexcept;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<Real> data_;
};

}  // namespace tcwm
