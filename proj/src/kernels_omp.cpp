#include <cmath>
#include <cstdint>
#include <cstring>

#include "fusevid/kernels.hpp"

// Parallel backend. Work is split over output rows/elements that no other
// iteration touches, and each output element keeps the same ascending
// accumulation order as the serial backend, so results match it bit for bit
// regardless of thread count. Guards skip the fork entirely for the tiny
// tensors this codebase mostly runs on.

namespace fusevid::kernels::omp {

namespace {
constexpr std::int64_t kMinElems = 1 << 13;
constexpr std::int64_t kMinRows = 8;
}  // namespace

template <class T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    const auto mi = static_cast<std::int64_t>(m);
    std::memset(c, 0, m * n * sizeof(T));
#pragma omp parallel for schedule(static) if (m * n >= 1024)
    for (std::int64_t i = 0; i < mi; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T aik = a[static_cast<std::size_t>(i) * k + kk];
            const T* brow = b + kk * n;
            T* crow = c + static_cast<std::size_t>(i) * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

template <class T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    const auto mi = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (m * n >= 1024)
    for (std::int64_t i = 0; i < mi; ++i) {
        const T* arow = a + static_cast<std::size_t>(i) * k;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T acc = 0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            c[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
}

template <class T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    const auto mi = static_cast<std::int64_t>(m);
    std::memset(c, 0, m * n * sizeof(T));
#pragma omp parallel for schedule(static) if (m * n >= 1024)
    for (std::int64_t i = 0; i < mi; ++i) {
        T* crow = c + static_cast<std::size_t>(i) * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T aki = a[kk * m + static_cast<std::size_t>(i)];
            const T* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
        }
    }
}

template <class T>
void ew_add(const T* a, const T* b, T* c, std::size_t n) {
    const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (ni >= kMinElems)
    for (std::int64_t i = 0; i < ni; ++i) c[i] = a[i] + b[i];
}

template <class T>
void ew_sub(const T* a, const T* b, T* c, std::size_t n) {
    const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (ni >= kMinElems)
    for (std::int64_t i = 0; i < ni; ++i) c[i] = a[i] - b[i];
}

template <class T>
void ew_mul(const T* a, const T* b, T* c, std::size_t n) {
    const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (ni >= kMinElems)
    for (std::int64_t i = 0; i < ni; ++i) c[i] = a[i] * b[i];
}

template <class T>
void ew_affine(const T* a, T alpha, T beta, T* c, std::size_t n) {
    const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (ni >= kMinElems)
    for (std::int64_t i = 0; i < ni; ++i) c[i] = alpha * a[i] + beta;
}

template <class T>
void axpy(const T* x, T alpha, T* y, std::size_t n) {
    const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (ni >= kMinElems)
    for (std::int64_t i = 0; i < ni; ++i) y[i] += alpha * x[i];
}

namespace {

template <class T>
inline T gelu_inner(T x) {
    const T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
    return c * (x + static_cast<T>(0.044715) * x * x * x);
}

}  // namespace

template <class T>
void gelu_fwd(const T* x, T* y, std::size_t n) {
    const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (ni >= kMinElems)
    for (std::int64_t i = 0; i < ni; ++i) {
        const T t = std::tanh(gelu_inner(x[i]));
        y[i] = static_cast<T>(0.5) * x[i] * (static_cast<T>(1) + t);
    }
}

template <class T>
void gelu_bwd(const T* x, const T* dy, T* dx, std::size_t n) {
    const T c = static_cast<T>(0.7978845608028654);
    const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) if (ni >= kMinElems)
    for (std::int64_t i = 0; i < ni; ++i) {
        const T xi = x[i];
        const T t = std::tanh(gelu_inner(xi));
        const T du = c * (static_cast<T>(1) + static_cast<T>(3) * static_cast<T>(0.044715) * xi * xi);
        const T g = static_cast<T>(0.5) * (static_cast<T>(1) + t) +
                    static_cast<T>(0.5) * xi * (static_cast<T>(1) - t * t) * du;
        dx[i] += dy[i] * g;
    }
}

template <class T>
void layer_norm_fwd(const T* x, T* y, T* mean, T* rstd, std::size_t rows, std::size_t cols,
                    T eps) {
    const auto ri = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (ri >= kMinRows)
    for (std::int64_t r = 0; r < ri; ++r) {
        const T* xr = x + static_cast<std::size_t>(r) * cols;
        T m = 0;
        for (std::size_t j = 0; j < cols; ++j) m += xr[j];
        m /= static_cast<T>(cols);
        T v = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            const T d = xr[j] - m;
            v += d * d;
        }
        v /= static_cast<T>(cols);
        const T rs = static_cast<T>(1) / std::sqrt(v + eps);
        mean[r] = m;
        rstd[r] = rs;
        T* yr = y + static_cast<std::size_t>(r) * cols;
        for (std::size_t j = 0; j < cols; ++j) yr[j] = (xr[j] - m) * rs;
    }
}

template <class T>
void layer_norm_bwd(const T* y, const T* dy, const T* rstd, T* dx, std::size_t rows,
                    std::size_t cols) {
    const auto ri = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (ri >= kMinRows)
    for (std::int64_t r = 0; r < ri; ++r) {
        const T* yr = y + static_cast<std::size_t>(r) * cols;
        const T* dyr = dy + static_cast<std::size_t>(r) * cols;
        T mean_dy = 0;
        T mean_dyy = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            mean_dy += dyr[j];
            mean_dyy += dyr[j] * yr[j];
        }
        mean_dy /= static_cast<T>(cols);
        mean_dyy /= static_cast<T>(cols);
        T* dxr = dx + static_cast<std::size_t>(r) * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            dxr[j] += rstd[r] * (dyr[j] - mean_dy - yr[j] * mean_dyy);
        }
    }
}

template <class T>
void softmax_fwd(const T* x, T* y, std::size_t rows, std::size_t cols) {
    const auto ri = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (ri >= kMinRows)
    for (std::int64_t r = 0; r < ri; ++r) {
        const T* xr = x + static_cast<std::size_t>(r) * cols;
        T* yr = y + static_cast<std::size_t>(r) * cols;
        T mx = xr[0];
        for (std::size_t j = 1; j < cols; ++j) mx = xr[j] > mx ? xr[j] : mx;
        T s = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
        }
        const T inv = static_cast<T>(1) / s;
        for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

template <class T>
void softmax_bwd(const T* y, const T* dy, T* dx, std::size_t rows, std::size_t cols) {
    const auto ri = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static) if (ri >= kMinRows)
    for (std::int64_t r = 0; r < ri; ++r) {
        const T* yr = y + static_cast<std::size_t>(r) * cols;
        const T* dyr = dy + static_cast<std::size_t>(r) * cols;
        T d = 0;
        for (std::size_t j = 0; j < cols; ++j) d += dyr[j] * yr[j];
        T* dxr = dx + static_cast<std::size_t>(r) * cols;
        for (std::size_t j = 0; j < cols; ++j) dxr[j] += yr[j] * (dyr[j] - d);
    }
}

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

}  // namespace fusevid::kernels::omp
