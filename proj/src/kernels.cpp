#include <atomic>

#include "fusevid/kernels.hpp"

namespace fusevid::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::parallel};
}

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }
Backend backend() { return g_backend.load(std::memory_order_relaxed); }

#define FUSEVID_ROUTE(NAME, ...)                              \
    if (backend() == Backend::serial) {                       \
        serial::NAME(__VA_ARGS__);                            \
    } else {                                                  \
        omp::NAME(__VA_ARGS__);                               \
    }

template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    FUSEVID_ROUTE(gemm_nn, a, b, c, m, k, n)
}
template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    FUSEVID_ROUTE(gemm_nt, a, b, c, m, k, n)
}
template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    FUSEVID_ROUTE(gemm_tn, a, b, c, m, k, n)
}
template <class T>
void ew_add(const T* a, const T* b, T* c, std::size_t n) {
    FUSEVID_ROUTE(ew_add, a, b, c, n)
}
template <class T>
void ew_sub(const T* a, const T* b, T* c, std::size_t n) {
    FUSEVID_ROUTE(ew_sub, a, b, c, n)
}
template <class T>
void ew_mul(const T* a, const T* b, T* c, std::size_t n) {
    FUSEVID_ROUTE(ew_mul, a, b, c, n)
}
template <class T>
void ew_affine(const T* a, T alpha, T beta, T* c, std::size_t n) {
    FUSEVID_ROUTE(ew_affine, a, alpha, beta, c, n)
}
template <class T>
void axpy(const T* x, T alpha, T* y, std::size_t n) {
    FUSEVID_ROUTE(axpy, x, alpha, y, n)
}
template <class T>
void gelu_fwd(const T* x, T* y, std::size_t n) {
    FUSEVID_ROUTE(gelu_fwd, x, y, n)
}
template <class T>
void gelu_bwd(const T* x, const T* dy, T* dx, std::size_t n) {
    FUSEVID_ROUTE(gelu_bwd, x, dy, dx, n)
}
template <class T>
void layer_norm_fwd(const T* x, T* y, T* mean, T* rstd, std::size_t rows, std::size_t cols,
                    T eps) {
    FUSEVID_ROUTE(layer_norm_fwd, x, y, mean, rstd, rows, cols, eps)
}
template <class T>
void layer_norm_bwd(const T* y, const T* dy, const T* rstd, T* dx, std::size_t rows,
                    std::size_t cols) {
    FUSEVID_ROUTE(layer_norm_bwd, y, dy, rstd, dx, rows, cols)
}
template <class T>
void softmax_fwd(const T* x, T* y, std::size_t rows, std::size_t cols) {
    FUSEVID_ROUTE(softmax_fwd, x, y, rows, cols)
}
template <class T>
void softmax_bwd(const T* y, const T* dy, T* dx, std::size_t rows, std::size_t cols) {
    FUSEVID_ROUTE(softmax_bwd, y, dy, dx, rows, cols)
}

#undef FUSEVID_ROUTE

#define FUSEVID_INSTANTIATE(T)                                                                \
    template void gemm_nn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t); \
    template void gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t); \
    template void gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t); \
    template void ew_add<T>(const T*, const T*, T*, std::size_t);                            \
    template void ew_sub<T>(const T*, const T*, T*, std::size_t);                            \
    template void ew_mul<T>(const T*, const T*, T*, std::size_t);                            \
    template void ew_affine<T>(const T*, T, T, T*, std::size_t);                             \
    template void axpy<T>(const T*, T, T*, std::size_t);                                     \
    template void gelu_fwd<T>(const T*, T*, std::size_t);                                    \
    template void gelu_bwd<T>(const T*, const T*, T*, std::size_t);                          \
    template void layer_norm_fwd<T>(const T*, T*, T*, T*, std::size_t, std::size_t, T);      \
    template void layer_norm_bwd<T>(const T*, const T*, const T*, T*, std::size_t,           \
                                    std::size_t);                                            \
    template void softmax_fwd<T>(const T*, T*, std::size_t, std::size_t);                    \
    template void softmax_bwd<T>(const T*, const T*, T*, std::size_t, std::size_t);

FUSEVID_INSTANTIATE(float)
FUSEVID_INSTANTIATE(double)
#undef FUSEVID_INSTANTIATE

}  // namespace fusevid::kernels
