#include "tcwm/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace tcwm::kernels {
namespace {

// W^T laid out [in x out] so the inner loop is a contiguous axpy over outputs.
std::vector<Real> transpose(const Real* w, std::size_t out, std::size_t in) {
    std::vector<Real> wt(in * out);
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i) wt[i * out + o] = w[o * in + i];
    return wt;
}

inline void forward_row(const Real* wt, const Real* b, const Real* x, Real* y, std::size_t in, std::size_t out) {
    for (std::size_t o = 0; o < out; ++o) y[o] = b ? b[o] : Real(0);
    for (std::size_t i = 0; i < in; ++i) {
        const Real xi = x[i];
        const Real* wrow = wt + i * out;
        for (std::size_t o = 0; o < out; ++o) y[o] += xi * wrow[o];
    }
}

inline void backward_input_row(const Real* w, const Real* dy, Real* dx, std::size_t in, std::size_t out) {
    for (std::size_t i = 0; i < in; ++i) dx[i] = Real(0);
    for (std::size_t o = 0; o < out; ++o) {
        const Real g = dy[o];
        const Real* wrow = w + o * in;
        for (std::size_t i = 0; i < in; ++i) dx[i] += g * wrow[i];
    }
}

inline void backward_weight_row(const Real* x, const Real* dy, Real* dw_row, Real* db, std::size_t o, AffineDims d) {
    Real bias_acc = db[o];
    for (std::size_t r = 0; r < d.rows; ++r) {
        const Real g = dy[r * d.out + o];
        bias_acc += g;
        const Real* xr = x + r * d.in;
        for (std::size_t i = 0; i < d.in; ++i) dw_row[i] += g * xr[i];
    }
    db[o] = bias_acc;
}

inline bool worth_threading(std::size_t work) { return work >= kParallelThreshold; }

}  // namespace

namespace serial {

void affine_forward(const Real* w, const Real* b, const Real* x, Real* y, AffineDims d) {
    const auto wt = transpose(w, d.out, d.in);
    for (std::size_t r = 0; r < d.rows; ++r) forward_row(wt.data(), b, x + r * d.in, y + r * d.out, d.in, d.out);
}

void affine_backward_input(const Real* w, const Real* dy, Real* dx, AffineDims d) {
    for (std::size_t r = 0; r < d.rows; ++r) backward_input_row(w, dy + r * d.out, dx + r * d.in, d.in, d.out);
}

void affine_backward_params(const Real* x, const Real* dy, Real* dw, Real* db, AffineDims d) {
    for (std::size_t o = 0; o < d.out; ++o) backward_weight_row(x, dy, dw + o * d.in, db, o, d);
}

void tanh_forward(const Real* x, Real* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward(const Real* y, const Real* dy, Real* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = dy[i] * (Real(1) - y[i] * y[i]);
}

}  // namespace serial

namespace parallel {

void affine_forward(const Real* w, const Real* b, const Real* x, Real* y, AffineDims d) {
    const auto wt = transpose(w, d.out, d.in);
    const auto rows = static_cast<std::int64_t>(d.rows);
#pragma omp parallel for schedule(static) if (worth_threading(d.rows * d.in * d.out))
    for (std::int64_t r = 0; r < rows; ++r) {
        forward_row(wt.data(), b, x + static_cast<std::size_t>(r) * d.in, y + static_cast<std::size_t>(r) * d.out,
                    d.in, d.out);
    }
}

void affine_backward_input(const Real* w, const Real* dy, Real* dx, AffineDims d) {
    const auto rows = static_cast<std::int64_t>(d.rows);
#pragma omp parallel for schedule(static) if (worth_threading(d.rows * d.in * d.out))
    for (std::int64_t r = 0; r < rows; ++r) {
        backward_input_row(w, dy + static_cast<std::size_t>(r) * d.out, dx + static_cast<std::size_t>(r) * d.in,
                           d.in, d.out);
    }
}

void affine_backward_params(const Real* x, const Real* dy, Real* dw, Real* db, AffineDims d) {
    const auto outs = static_cast<std::int64_t>(d.out);
#pragma omp parallel for schedule(static) if (worth_threading(d.rows * d.in * d.out))
    for (std::int64_t o = 0; o < outs; ++o) {
        const auto uo = static_cast<std::size_t>(o);
        backward_weight_row(x, dy, dw + uo * d.in, db, uo, d);
    }
}

void tanh_forward(const Real* x, Real* y, std::size_t n) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (worth_threading(n * 16))
    for (std::int64_t i = 0; i < count; ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward(const Real* y, const Real* dy, Real* dx, std::size_t n) {
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (worth_threading(n * 16))
    for (std::int64_t i = 0; i < count; ++i) dx[i] = dy[i] * (Real(1) - y[i] * y[i]);
}

}  // namespace parallel
}  // namespace tcwm::kernels
