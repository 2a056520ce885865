#include "anyres/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "anyres/threadpool.hpp"

namespace anyres::kernels::scalar {

template <class T>
void gemm_nn(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N, bool acc) {
    parallel_for(M, [&](int64_t m0, int64_t m1) {
        for (int64_t m = m0; m < m1; ++m) {
            T* crow = c + m * N;
            if (!acc) std::fill(crow, crow + N, T(0));
            const T* arow = a + m * K;
            for (int64_t k = 0; k < K; ++k) {
                T av = arow[k];
                const T* brow = b + k * N;
                for (int64_t n = 0; n < N; ++n) crow[n] += av * brow[n];
            }
        }
    });
}

template <class T>
void gemm_nt(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N, bool acc) {
    parallel_for(M, [&](int64_t m0, int64_t m1) {
        for (int64_t m = m0; m < m1; ++m) {
            const T* arow = a + m * K;
            T* crow = c + m * N;
            for (int64_t n = 0; n < N; ++n) {
                const T* brow = b + n * K;
                T s = 0;
                for (int64_t k = 0; k < K; ++k) s += arow[k] * brow[k];
                crow[n] = acc ? crow[n] + s : s;
            }
        }
    });
}

template <class T>
void gemm_tn(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N, bool acc) {
    parallel_for(M, [&](int64_t m0, int64_t m1) {
        for (int64_t m = m0; m < m1; ++m) {
            T* crow = c + m * N;
            if (!acc) std::fill(crow, crow + N, T(0));
            for (int64_t k = 0; k < K; ++k) {
                T av = a[k * M + m];
                const T* brow = b + k * N;
                for (int64_t n = 0; n < N; ++n) crow[n] += av * brow[n];
            }
        }
    });
}

template <class T>
void add(const T* a, const T* b, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <class T>
void sub(const T* a, const T* b, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

template <class T>
void mul(const T* a, const T* b, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

template <class T>
void axpy(T alpha, const T* x, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void scale(T alpha, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] *= alpha;
}

template <class T>
T sum(const T* x, size_t n) {
    T s = 0;
    for (size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

template <class T>
T sumsq(const T* x, size_t n) {
    T s = 0;
    for (size_t i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
}

template <class T>
T dot(const T* a, const T* b, size_t n) {
    T s = 0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

// tanh-form gelu: 0.5*x*(1 + tanh(c0*(x + c1*x^3)))
template <class T>
void gelu_fwd(const T* x, T* y, size_t n) {
    const T c0 = T(0.7978845608028654), c1 = T(0.044715);
    for (size_t i = 0; i < n; ++i) {
        T v = x[i];
        y[i] = T(0.5) * v * (T(1) + std::tanh(c0 * (v + c1 * v * v * v)));
    }
}

template <class T>
void gelu_bwd(const T* x, const T* dy, T* dx, size_t n) {
    const T c0 = T(0.7978845608028654), c1 = T(0.044715);
    for (size_t i = 0; i < n; ++i) {
        T v = x[i];
        T u = c0 * (v + c1 * v * v * v);
        T th = std::tanh(u);
        T du = c0 * (T(1) + T(3) * c1 * v * v);
        T g = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du;
        dx[i] += dy[i] * g;
    }
}

template <class T>
void softmax_row(const T* x, T* y, size_t n) {
    T mx = x[0];
    for (size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    T s = 0;
    for (size_t i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - mx);
        s += y[i];
    }
    T inv = T(1) / s;
    for (size_t i = 0; i < n; ++i) y[i] *= inv;
}

#define ANYRES_INSTANTIATE(T)                                                               \
    template void gemm_nn<T>(const T*, const T*, T*, int64_t, int64_t, int64_t, bool);     \
    template void gemm_nt<T>(const T*, const T*, T*, int64_t, int64_t, int64_t, bool);     \
    template void gemm_tn<T>(const T*, const T*, T*, int64_t, int64_t, int64_t, bool);     \
    template void add<T>(const T*, const T*, T*, size_t);                                  \
    template void sub<T>(const T*, const T*, T*, size_t);                                  \
    template void mul<T>(const T*, const T*, T*, size_t);                                  \
    template void axpy<T>(T, const T*, T*, size_t);                                        \
    template void scale<T>(T, T*, size_t);                                                 \
    template T sum<T>(const T*, size_t);                                                   \
    template T sumsq<T>(const T*, size_t);                                                 \
    template T dot<T>(const T*, const T*, size_t);                                         \
    template void gelu_fwd<T>(const T*, T*, size_t);                                       \
    template void gelu_bwd<T>(const T*, const T*, T*, size_t);                             \
    template void softmax_row<T>(const T*, T*, size_t);

ANYRES_INSTANTIATE(float)
ANYRES_INSTANTIATE(double)
#undef ANYRES_INSTANTIATE

}  // namespace anyres::kernels::scalar
