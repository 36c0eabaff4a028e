#pragma once

// Dense kernels behind every affine layer.
//
// Two implementations share one arithmetic order:
//   serial::    reference loops, kept for testing and benchmarking
//   parallel::  OpenMP over independent output rows
// Each output element is accumulated by the same sequence of float adds in
// both, so the parallel kernels are bit-identical to the serial ones for any
// thread count. The unqualified entry points dispatch to parallel::.

#include <cstddef>

#include "tcwm/tensor.hpp"

namespace tcwm::kernels {

struct AffineDims {
    std::size_t rows = 0;  // batch rows
    std::size_t in = 0;
    std::size_t out = 0;
};

namespace serial {
// y[r,:] = b + W x[r,:]   (W is [out x in], row-major)
void affine_forward(const Real* w, const Real* b, const Real* x, Real* y, AffineDims d);
// dx[r,:] = W^T dy[r,:]
void affine_backward_input(const Real* w, const Real* dy, Real* dx, AffineDims d);
// dw += dy^T x, db += column sums of dy
void affine_backward_params(const Real* x, const Real* dy, Real* dw, Real* db, AffineDims d);
void tanh_forward(const Real* x, Real* y, std::size_t n);
// dx = dy * (1 - y^2)
void tanh_backward(const Real* y, const Real* dy, Real* dx, std::size_t n);
}  // namespace serial

namespace parallel {
void affine_forward(const Real* w, const Real* b, const Real* x, Real* y, AffineDims d);
void affine_backward_input(const Real* w, const Real* dy, Real* dx, AffineDims d);
void affine_backward_params(const Real* x, const Real* dy, Real* dw, Real* db, AffineDims d);
void tanh_forward(const Real* x, Real* y, std::size_t n);
void tanh_backward(const Real* y, const Real* dy, Real* dx, std::size_t n);
}  // namespace parallel

// Work (multiply-adds) below which the parallel kernels stay on one thread.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

inline void affine_forward(const Real* w, const Real* b, const Real* x, Real* y, AffineDims d) {
    parallel::affine_forward(w, b, x, y, d);
}
inline void affine_backward_input(const Real* w, const Real* dy, Real* dx, AffineDims d) {
    parallel::affine_backward_input(w, dy, dx, d);
}
inline void affine_backward_params(const Real* x, const Real* dy, Real* dw, Real* db, AffineDims d) {
    parallel::affine_backward_params(x, dy, dw, db, d);
}
inline void tanh_forward(const Real* x, Real* y, std::size_t n) { parallel::tanh_forward(x, y, n); }
inline void tanh_backward(const Real* y, const Real* dy, Real* dx, std::size_t n) {
    parallel::tanh_backward(y, dy, dx, n);
}

}  // namespace tcwm::kernels
