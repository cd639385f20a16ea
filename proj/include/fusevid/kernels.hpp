#pragma once

#include <cstddef>

namespace fusevid::kernels {

// Compute kernels come in two backends with identical semantics:
//
//   serial::  straight loops, the reference implementation
//   omp::     OpenMP-parallel over independent output elements
//
// Every kernel computes each output element with a fixed, serial reduction
// order, so the two backends produce bit-identical results at any thread
// count. Whole-tensor reductions (sum/dot) stay single-order on purpose and
// live only in serial form.
//
// The free functions at namespace scope route to the active backend.

enum class Backend { serial, parallel };

void set_backend(Backend b);
Backend backend();

namespace serial {

// C(m,n) = A(m,k) * B(k,n)
template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
// C(m,n) = A(m,k) * B(n,k)^T
template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
// C(m,n) = A(k,m)^T * B(k,n)
template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

template <class T>
void ew_add(const T* a, const T* b, T* c, std::size_t n);
template <class T>
void ew_sub(const T* a, const T* b, T* c, std::size_t n);
template <class T>
void ew_mul(const T* a, const T* b, T* c, std::size_t n);
// c = alpha * a + beta
template <class T>
void ew_affine(const T* a, T alpha, T beta, T* c, std::size_t n);
// y += alpha * x
template <class T>
void axpy(const T* x, T alpha, T* y, std::size_t n);

template <class T>
void gelu_fwd(const T* x, T* y, std::size_t n);
// dx += dy * gelu'(x)
template <class T>
void gelu_bwd(const T* x, const T* dy, T* dx, std::size_t n);

// Row-wise layer norm without affine terms: y = (x - mean) * rstd per row.
// mean/rstd hold one value per row for the backward pass.
template <class T>
void layer_norm_fwd(const T* x, T* y, T* mean, T* rstd, std::size_t rows, std::size_t cols,
                    T eps);
// dx += rstd * (dy - mean(dy) - y * mean(dy * y)) per row.
template <class T>
void layer_norm_bwd(const T* y, const T* dy, const T* rstd, T* dx, std::size_t rows,
                    std::size_t cols);

template <class T>
void softmax_fwd(const T* x, T* y, std::size_t rows, std::size_t cols);
// dx += y * (dy - dot(dy, y)) per row.
template <class T>
void softmax_bwd(const T* y, const T* dy, T* dx, std::size_t rows, std::size_t cols);

// Fixed-order whole-tensor reductions (no parallel variant).
template <class T>
T sum(const T* x, std::size_t n);
template <class T>
T dot(const T* a, const T* b, std::size_t n);

}  // namespace serial

namespace omp {

template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

template <class T>
void ew_add(const T* a, const T* b, T* c, std::size_t n);
template <class T>
void ew_sub(const T* a, const T* b, T* c, std::size_t n);
template <class T>
void ew_mul(const T* a, const T* b, T* c, std::size_t n);
template <class T>
void ew_affine(const T* a, T alpha, T beta, T* c, std::size_t n);
template <class T>
void axpy(const T* x, T alpha, T* y, std::size_t n);

template <class T>
void gelu_fwd(const T* x, T* y, std::size_t n);
template <class T>
void gelu_bwd(const T* x, const T* dy, T* dx, std::size_t n);

template <class T>
void layer_norm_fwd(const T* x, T* y, T* mean, T* rstd, std::size_t rows, std::size_t cols,
                    T eps);
template <class T>
void layer_norm_bwd(const T* y, const T* dy, const T* rstd, T* dx, std::size_t rows,
                    std::size_t cols);

template <class T>
void softmax_fwd(const T* x, T* y, std::size_t rows, std::size_t cols);
template <class T>
void softmax_bwd(const T* y, const T* dy, T* dx, std::size_t rows, std::size_t cols);

}  // namespace omp

// Routed entry points. These pick serial:: or omp:: based on set_backend().
template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);
template <class T>
void ew_add(const T* a, const T* b, T* c, std::size_t n);
template <class T>
void ew_sub(const T* a, const T* b, T* c, std::size_t n);
template <class T>
void ew_mul(const T* a, const T* b, T* c, std::size_t n);
template <class T>
void ew_affine(const T* a, T alpha, T beta, T* c, std::size_t n);
template <class T>
void axpy(const T* x, T alpha, T* y, std::size_t n);
template <class T>
void gelu_fwd(const T* x, T* y, std::size_t n);
template <class T>
void gelu_bwd(const T* x, const T* dy, T* dx, std::size_t n);
template <class T>
void layer_norm_fwd(const T* x, T* y, T* mean, T* rstd, std::size_t rows, std::size_t cols,
                    T eps);
template <class T>
void layer_norm_bwd(const T* y, const T* dy, const T* rstd, T* dx, std::size_t rows,
                    std::size_t cols);
template <class T>
void softmax_fwd(const T* x, T* y, std::size_t rows, std::size_t cols);
template <class T>
void softmax_bwd(const T* y, const T* dy, T* dx, std::size_t rows, std::size_t cols);

}  // namespace fusevid::kernels
