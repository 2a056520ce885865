#pragma once

#include <cstddef>
#include <cstdint>

// Arithmetic inner loops. Scalar reference implementations live in
// kernels::scalar (float and double); AVX2 variants in kernels::avx2 (float
// only). The unqualified functions dispatch at runtime: float routes to AVX2
// when the CPU supports it and SIMD is not disabled, double always runs the
// scalar reference. Equivalence between the two backends is covered by
// tests/test_kernels.cpp.
namespace anyres::kernels {

// --- gemm conventions -------------------------------------------------------
// gemm_nn: C[M,N] (+)= A[M,K]  * B[K,N]
// gemm_nt: C[M,N] (+)= A[M,K]  * B[N,K]^T   (C[m,n] = sum_k A[m,k]*B[n,k])
// gemm_tn: C[M,N] (+)= A[K,M]^T * B[K,N]    (C[m,n] = sum_k A[k,m]*B[k,n])
// acc=false overwrites C, acc=true accumulates.

namespace scalar {
template <class T>
void gemm_nn(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N, bool acc);
template <class T>
void gemm_nt(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N, bool acc);
template <class T>
void gemm_tn(const T* a, const T* b, T* c, int64_t M, int64_t K, int64_t N, bool acc);

template <class T>
void add(const T* a, const T* b, T* y, size_t n);
template <class T>
void sub(const T* a, const T* b, T* y, size_t n);
template <class T>
void mul(const T* a, const T* b, T* y, size_t n);
template <class T>
void axpy(T alpha, const T* x, T* y, size_t n);  // y += alpha*x
template <class T>
void scale(T alpha, T* y, size_t n);

template <class T>
T sum(const T* x, size_t n);
template <class T>
T sumsq(const T* x, size_t n);
template <class T>
T dot(const T* a, const T* b, size_t n);

template <class T>
void gelu_fwd(const T* x, T* y, size_t n);
template <class T>
void gelu_bwd(const T* x, const T* dy, T* dx, size_t n);  // dx += dy * gelu'(x)

template <class T>
void softmax_row(const T* x, T* y, size_t n);
}  // namespace scalar

namespace avx2 {
bool compiled();
void gemm_nn(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc);
void gemm_nt(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc);
void gemm_tn(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc);
void add(const float* a, const float* b, float* y, size_t n);
void sub(const float* a, const float* b, float* y, size_t n);
void mul(const float* a, const float* b, float* y, size_t n);
void axpy(float alpha, const float* x, float* y, size_t n);
void scale(float alpha, float* y, size_t n);
float sum(const float* x, size_t n);
float sumsq(const float* x, size_t n);
float dot(const float* a, const float* b, size_t n);
void gelu_fwd(const float* x, float* y, size_t n);
void gelu_bwd(const float* x, const float* dy, float* dx, size_t n);
void softmax_row(const float* x, float* y, size_t n);
}  // namespace avx2

// Runtime backend control.
bool avx2_supported();            // CPU capability AND compiled in
void set_simd_enabled(bool on);   // force the scalar path when off
bool simd_active();               // effective routing decision

// Dispatched entry points.
void gemm_nn(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc);
void gemm_nt(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc);
void gemm_tn(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc);
void gemm_nn(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N, bool acc);
void gemm_nt(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N, bool acc);
void gemm_tn(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N, bool acc);

template <class T>
void add(const T* a, const T* b, T* y, size_t n);
template <class T>
void sub(const T* a, const T* b, T* y, size_t n);
template <class T>
void mul(const T* a, const T* b, T* y, size_t n);
template <class T>
void axpy(T alpha, const T* x, T* y, size_t n);
template <class T>
void scale(T alpha, T* y, size_t n);
template <class T>
T sum(const T* x, size_t n);
template <class T>
T sumsq(const T* x, size_t n);
template <class T>
T dot(const T* a, const T* b, size_t n);
template <class T>
void gelu_fwd(const T* x, T* y, size_t n);
template <class T>
void gelu_bwd(const T* x, const T* dy, T* dx, size_t n);
template <class T>
void softmax_row(const T* x, T* y, size_t n);

}  // namespace anyres::kernels
