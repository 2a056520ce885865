#include <atomic>

#include "anyres/kernels.hpp"

namespace anyres::kernels {

namespace {
bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}
std::atomic<bool> g_simd_enabled{true};
}  // namespace

bool avx2_supported() {
    static const bool ok = cpu_has_avx2() && avx2::compiled();
    return ok;
}

void set_simd_enabled(bool on) { g_simd_enabled.store(on); }
bool simd_active() { return g_simd_enabled.load() && avx2_supported(); }

#define ANYRES_DISPATCH_F(call_avx2, call_scalar) \
    if (simd_active()) {                          \
        call_avx2;                                \
    } else {                                      \
        call_scalar;                              \
    }

void gemm_nn(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc) {
    ANYRES_DISPATCH_F(avx2::gemm_nn(a, b, c, M, K, N, acc), scalar::gemm_nn(a, b, c, M, K, N, acc))
}
void gemm_nt(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc) {
    ANYRES_DISPATCH_F(avx2::gemm_nt(a, b, c, M, K, N, acc), scalar::gemm_nt(a, b, c, M, K, N, acc))
}
void gemm_tn(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc) {
    ANYRES_DISPATCH_F(avx2::gemm_tn(a, b, c, M, K, N, acc), scalar::gemm_tn(a, b, c, M, K, N, acc))
}
void gemm_nn(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N, bool acc) {
    scalar::gemm_nn(a, b, c, M, K, N, acc);
}
void gemm_nt(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N, bool acc) {
    scalar::gemm_nt(a, b, c, M, K, N, acc);
}
void gemm_tn(const double* a, const double* b, double* c, int64_t M, int64_t K, int64_t N, bool acc) {
    scalar::gemm_tn(a, b, c, M, K, N, acc);
}

template <>
void add<float>(const float* a, const float* b, float* y, size_t n) {
    ANYRES_DISPATCH_F(avx2::add(a, b, y, n), scalar::add(a, b, y, n))
}
template <>
void sub<float>(const float* a, const float* b, float* y, size_t n) {
    ANYRES_DISPATCH_F(avx2::sub(a, b, y, n), scalar::sub(a, b, y, n))
}
template <>
void mul<float>(const float* a, const float* b, float* y, size_t n) {
    ANYRES_DISPATCH_F(avx2::mul(a, b, y, n), scalar::mul(a, b, y, n))
}
template <>
void axpy<float>(float alpha, const float* x, float* y, size_t n) {
    ANYRES_DISPATCH_F(avx2::axpy(alpha, x, y, n), scalar::axpy(alpha, x, y, n))
}
template <>
void scale<float>(float alpha, float* y, size_t n) {
    ANYRES_DISPATCH_F(avx2::scale(alpha, y, n), scalar::scale(alpha, y, n))
}
template <>
float sum<float>(const float* x, size_t n) {
    if (simd_active()) return avx2::sum(x, n);
    return scalar::sum(x, n);
}
template <>
float sumsq<float>(const float* x, size_t n) {
    if (simd_active()) return avx2::sumsq(x, n);
    return scalar::sumsq(x, n);
}
template <>
float dot<float>(const float* a, const float* b, size_t n) {
    if (simd_active()) return avx2::dot(a, b, n);
    return scalar::dot(a, b, n);
}
template <>
void gelu_fwd<float>(const float* x, float* y, size_t n) {
    ANYRES_DISPATCH_F(avx2::gelu_fwd(x, y, n), scalar::gelu_fwd(x, y, n))
}
template <>
void gelu_bwd<float>(const float* x, const float* dy, float* dx, size_t n) {
    ANYRES_DISPATCH_F(avx2::gelu_bwd(x, dy, dx, n), scalar::gelu_bwd(x, dy, dx, n))
}
template <>
void softmax_row<float>(const float* x, float* y, size_t n) {
    ANYRES_DISPATCH_F(avx2::softmax_row(x, y, n), scalar::softmax_row(x, y, n))
}

template <>
void add<double>(const double* a, const double* b, double* y, size_t n) { scalar::add(a, b, y, n); }
template <>
void sub<double>(const double* a, const double* b, double* y, size_t n) { scalar::sub(a, b, y, n); }
template <>
void mul<double>(const double* a, const double* b, double* y, size_t n) { scalar::mul(a, b, y, n); }
template <>
void axpy<double>(double alpha, const double* x, double* y, size_t n) { scalar::axpy(alpha, x, y, n); }
template <>
void scale<double>(double alpha, double* y, size_t n) { scalar::scale(alpha, y, n); }
template <>
double sum<double>(const double* x, size_t n) { return scalar::sum(x, n); }
template <>
double sumsq<double>(const double* x, size_t n) { return scalar::sumsq(x, n); }
template <>
double dot<double>(const double* a, const double* b, size_t n) { return scalar::dot(a, b, n); }
template <>
void gelu_fwd<double>(const double* x, double* y, size_t n) { scalar::gelu_fwd(x, y, n); }
template <>
void gelu_bwd<double>(const double* x, const double* dy, double* dx, size_t n) { scalar::gelu_bwd(x, dy, dx, n); }
template <>
void softmax_row<double>(const double* x, double* y, size_t n) { scalar::softmax_row(x, y, n); }

#undef ANYRES_DISPATCH_F

}  // namespace anyres::kernels
