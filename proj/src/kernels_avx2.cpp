#include <algorithm>
#include <cmath>

#include "anyres/kernels.hpp"
#include "anyres/threadpool.hpp"

#ifdef ANYRES_BUILD_AVX2
#include <immintrin.h>
#endif

namespace anyres::kernels::avx2 {

#ifndef ANYRES_BUILD_AVX2

bool compiled() { return false; }
// Fallback stubs so the library links on non-x86 toolchains; the dispatcher
// never routes here when compiled() is false.
void gemm_nn(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc) { scalar::gemm_nn(a, b, c, M, K, N, acc); }
void gemm_nt(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc) { scalar::gemm_nt(a, b, c, M, K, N, acc); }
void gemm_tn(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc) { scalar::gemm_tn(a, b, c, M, K, N, acc); }
void add(const float* a, const float* b, float* y, size_t n) { scalar::add(a, b, y, n); }
void sub(const float* a, const float* b, float* y, size_t n) { scalar::sub(a, b, y, n); }
void mul(const float* a, const float* b, float* y, size_t n) { scalar::mul(a, b, y, n); }
void axpy(float alpha, const float* x, float* y, size_t n) { scalar::axpy(alpha, x, y, n); }
void scale(float alpha, float* y, size_t n) { scalar::scale(alpha, y, n); }
float sum(const float* x, size_t n) { return scalar::sum(x, n); }
float sumsq(const float* x, size_t n) { return scalar::sumsq(x, n); }
float dot(const float* a, const float* b, size_t n) { return scalar::dot(a, b, n); }
void gelu_fwd(const float* x, float* y, size_t n) { scalar::gelu_fwd(x, y, n); }
void gelu_bwd(const float* x, const float* dy, float* dx, size_t n) { scalar::gelu_bwd(x, dy, dx, n); }
void softmax_row(const float* x, float* y, size_t n) { scalar::softmax_row(x, y, n); }

#else

bool compiled() { return true; }

static inline float hsum8(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}

// exp on 8 lanes, Cephes-style polynomial with 2^n scaling.
static inline __m256 exp8(__m256 x) {
    const __m256 hi = _mm256_set1_ps(88.3762626647950f);
    const __m256 lo = _mm256_set1_ps(-87.3365478515625f);
    const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
    const __m256 c1 = _mm256_set1_ps(0.693359375f);
    const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
    x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
    __m256 fx = _mm256_round_ps(_mm256_mul_ps(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    x = _mm256_fnmadd_ps(fx, c1, x);
    x = _mm256_fnmadd_ps(fx, c2, x);
    __m256 z = _mm256_mul_ps(x, x);
    __m256 p = _mm256_set1_ps(1.9875691500e-4f);
    p = _mm256_fmadd_ps(p, x, _mm256_set1_ps(1.3981999507e-3f));
    p = _mm256_fmadd_ps(p, x, _mm256_set1_ps(8.3334519073e-3f));
    p = _mm256_fmadd_ps(p, x, _mm256_set1_ps(4.1665795894e-2f));
    p = _mm256_fmadd_ps(p, x, _mm256_set1_ps(1.6666665459e-1f));
    p = _mm256_fmadd_ps(p, x, _mm256_set1_ps(5.0000001201e-1f));
    p = _mm256_fmadd_ps(p, z, x);
    p = _mm256_add_ps(p, _mm256_set1_ps(1.0f));
    __m256i n = _mm256_cvtps_epi32(fx);
    n = _mm256_add_epi32(n, _mm256_set1_epi32(127));
    n = _mm256_slli_epi32(n, 23);
    return _mm256_mul_ps(p, _mm256_castsi256_ps(n));
}

static inline __m256 tanh8(__m256 x) {
    // tanh(x) = 1 - 2/(exp(2x)+1)
    const __m256 one = _mm256_set1_ps(1.0f);
    const __m256 two = _mm256_set1_ps(2.0f);
    __m256 e = exp8(_mm256_mul_ps(x, two));
    return _mm256_sub_ps(one, _mm256_div_ps(two, _mm256_add_ps(e, one)));
}

// 4-row register blocking: each 16-wide B slice is loaded once per four
// output rows, which matters when B is larger than L2.
void gemm_nn(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc) {
    int64_t blocks = (M + 3) / 4;
    parallel_for(blocks, [&](int64_t blk0, int64_t blk1) {
        for (int64_t blk = blk0; blk < blk1; ++blk) {
            int64_t m = blk * 4;
            int64_t mrows = std::min<int64_t>(4, M - m);
            const float* arow[4];
            float* crow[4];
            for (int64_t r = 0; r < mrows; ++r) {
                arow[r] = a + (m + r) * K;
                crow[r] = c + (m + r) * N;
            }
            if (mrows == 4) {
                int64_t n = 0;
                for (; n + 16 <= N; n += 16) {
                    __m256 a00, a01, a10, a11, a20, a21, a30, a31;
                    if (acc) {
                        a00 = _mm256_loadu_ps(crow[0] + n);
                        a01 = _mm256_loadu_ps(crow[0] + n + 8);
                        a10 = _mm256_loadu_ps(crow[1] + n);
                        a11 = _mm256_loadu_ps(crow[1] + n + 8);
                        a20 = _mm256_loadu_ps(crow[2] + n);
                        a21 = _mm256_loadu_ps(crow[2] + n + 8);
                        a30 = _mm256_loadu_ps(crow[3] + n);
                        a31 = _mm256_loadu_ps(crow[3] + n + 8);
                    } else {
                        a00 = a01 = a10 = a11 = a20 = a21 = a30 = a31 = _mm256_setzero_ps();
                    }
                    for (int64_t k = 0; k < K; ++k) {
                        const float* brow = b + k * N + n;
                        __m256 b0 = _mm256_loadu_ps(brow);
                        __m256 b1 = _mm256_loadu_ps(brow + 8);
                        __m256 av = _mm256_set1_ps(arow[0][k]);
                        a00 = _mm256_fmadd_ps(av, b0, a00);
                        a01 = _mm256_fmadd_ps(av, b1, a01);
                        av = _mm256_set1_ps(arow[1][k]);
                        a10 = _mm256_fmadd_ps(av, b0, a10);
                        a11 = _mm256_fmadd_ps(av, b1, a11);
                        av = _mm256_set1_ps(arow[2][k]);
                        a20 = _mm256_fmadd_ps(av, b0, a20);
                        a21 = _mm256_fmadd_ps(av, b1, a21);
                        av = _mm256_set1_ps(arow[3][k]);
                        a30 = _mm256_fmadd_ps(av, b0, a30);
                        a31 = _mm256_fmadd_ps(av, b1, a31);
                    }
                    _mm256_storeu_ps(crow[0] + n, a00);
                    _mm256_storeu_ps(crow[0] + n + 8, a01);
                    _mm256_storeu_ps(crow[1] + n, a10);
                    _mm256_storeu_ps(crow[1] + n + 8, a11);
                    _mm256_storeu_ps(crow[2] + n, a20);
                    _mm256_storeu_ps(crow[2] + n + 8, a21);
                    _mm256_storeu_ps(crow[3] + n, a30);
                    _mm256_storeu_ps(crow[3] + n + 8, a31);
                }
                for (; n + 8 <= N; n += 8) {
                    __m256 r0 = acc ? _mm256_loadu_ps(crow[0] + n) : _mm256_setzero_ps();
                    __m256 r1 = acc ? _mm256_loadu_ps(crow[1] + n) : _mm256_setzero_ps();
                    __m256 r2 = acc ? _mm256_loadu_ps(crow[2] + n) : _mm256_setzero_ps();
                    __m256 r3 = acc ? _mm256_loadu_ps(crow[3] + n) : _mm256_setzero_ps();
                    for (int64_t k = 0; k < K; ++k) {
                        __m256 b0 = _mm256_loadu_ps(b + k * N + n);
                        r0 = _mm256_fmadd_ps(_mm256_set1_ps(arow[0][k]), b0, r0);
                        r1 = _mm256_fmadd_ps(_mm256_set1_ps(arow[1][k]), b0, r1);
                        r2 = _mm256_fmadd_ps(_mm256_set1_ps(arow[2][k]), b0, r2);
                        r3 = _mm256_fmadd_ps(_mm256_set1_ps(arow[3][k]), b0, r3);
                    }
                    _mm256_storeu_ps(crow[0] + n, r0);
                    _mm256_storeu_ps(crow[1] + n, r1);
                    _mm256_storeu_ps(crow[2] + n, r2);
                    _mm256_storeu_ps(crow[3] + n, r3);
                }
                for (; n < N; ++n) {
                    for (int64_t r = 0; r < 4; ++r) {
                        float s = acc ? crow[r][n] : 0.0f;
                        for (int64_t k = 0; k < K; ++k) s += arow[r][k] * b[k * N + n];
                        crow[r][n] = s;
                    }
                }
            } else {
                for (int64_t r = 0; r < mrows; ++r) {
                    int64_t n = 0;
                    for (; n + 8 <= N; n += 8) {
                        __m256 acc0 = acc ? _mm256_loadu_ps(crow[r] + n) : _mm256_setzero_ps();
                        for (int64_t k = 0; k < K; ++k)
                            acc0 = _mm256_fmadd_ps(_mm256_set1_ps(arow[r][k]),
                                                   _mm256_loadu_ps(b + k * N + n), acc0);
                        _mm256_storeu_ps(crow[r] + n, acc0);
                    }
                    for (; n < N; ++n) {
                        float s = acc ? crow[r][n] : 0.0f;
                        for (int64_t k = 0; k < K; ++k) s += arow[r][k] * b[k * N + n];
                        crow[r][n] = s;
                    }
                }
            }
        }
    });
}

void gemm_nt(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc) {
    parallel_for(M, [&](int64_t m0, int64_t m1) {
        for (int64_t m = m0; m < m1; ++m) {
            const float* arow = a + m * K;
            float* crow = c + m * N;
            int64_t n = 0;
            for (; n + 4 <= N; n += 4) {
                __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
                __m256 s2 = _mm256_setzero_ps(), s3 = _mm256_setzero_ps();
                const float* b0 = b + (n + 0) * K;
                const float* b1 = b + (n + 1) * K;
                const float* b2 = b + (n + 2) * K;
                const float* b3 = b + (n + 3) * K;
                int64_t k = 0;
                for (; k + 8 <= K; k += 8) {
                    __m256 av = _mm256_loadu_ps(arow + k);
                    s0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + k), s0);
                    s1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + k), s1);
                    s2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b2 + k), s2);
                    s3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b3 + k), s3);
                }
                float r0 = hsum8(s0), r1 = hsum8(s1), r2 = hsum8(s2), r3 = hsum8(s3);
                for (; k < K; ++k) {
                    float av = arow[k];
                    r0 += av * b0[k];
                    r1 += av * b1[k];
                    r2 += av * b2[k];
                    r3 += av * b3[k];
                }
                if (acc) {
                    crow[n] += r0;
                    crow[n + 1] += r1;
                    crow[n + 2] += r2;
                    crow[n + 3] += r3;
                } else {
                    crow[n] = r0;
                    crow[n + 1] = r1;
                    crow[n + 2] = r2;
                    crow[n + 3] = r3;
                }
            }
            for (; n < N; ++n) {
                const float* brow = b + n * K;
                __m256 s0 = _mm256_setzero_ps();
                int64_t k = 0;
                for (; k + 8 <= K; k += 8)
                    s0 = _mm256_fmadd_ps(_mm256_loadu_ps(arow + k), _mm256_loadu_ps(brow + k), s0);
                float r = hsum8(s0);
                for (; k < K; ++k) r += arow[k] * brow[k];
                crow[n] = acc ? crow[n] + r : r;
            }
        }
    });
}

// 4-column blocking over m: the four A values per k are contiguous, and each
// B row slice is shared across the four output rows.
void gemm_tn(const float* a, const float* b, float* c, int64_t M, int64_t K, int64_t N, bool acc) {
    int64_t blocks = (M + 3) / 4;
    parallel_for(blocks, [&](int64_t blk0, int64_t blk1) {
        for (int64_t blk = blk0; blk < blk1; ++blk) {
            int64_t m = blk * 4;
            int64_t mrows = std::min<int64_t>(4, M - m);
            if (!acc)
                for (int64_t r = 0; r < mrows; ++r) std::fill(c + (m + r) * N, c + (m + r) * N + N, 0.0f);
            if (mrows == 4 && N >= 8) {
                float* c0 = c + m * N;
                float* c1 = c0 + N;
                float* c2 = c1 + N;
                float* c3 = c2 + N;
                int64_t n = 0;
                for (; n + 8 <= N; n += 8) {
                    __m256 r0 = _mm256_loadu_ps(c0 + n);
                    __m256 r1 = _mm256_loadu_ps(c1 + n);
                    __m256 r2 = _mm256_loadu_ps(c2 + n);
                    __m256 r3 = _mm256_loadu_ps(c3 + n);
                    for (int64_t k = 0; k < K; ++k) {
                        const float* av = a + k * M + m;
                        __m256 bv = _mm256_loadu_ps(b + k * N + n);
                        r0 = _mm256_fmadd_ps(_mm256_set1_ps(av[0]), bv, r0);
                        r1 = _mm256_fmadd_ps(_mm256_set1_ps(av[1]), bv, r1);
                        r2 = _mm256_fmadd_ps(_mm256_set1_ps(av[2]), bv, r2);
                        r3 = _mm256_fmadd_ps(_mm256_set1_ps(av[3]), bv, r3);
                    }
                    _mm256_storeu_ps(c0 + n, r0);
                    _mm256_storeu_ps(c1 + n, r1);
                    _mm256_storeu_ps(c2 + n, r2);
                    _mm256_storeu_ps(c3 + n, r3);
                }
                for (; n < N; ++n) {
                    float s0 = c0[n], s1 = c1[n], s2 = c2[n], s3 = c3[n];
                    for (int64_t k = 0; k < K; ++k) {
                        const float* av = a + k * M + m;
                        float bv = b[k * N + n];
                        s0 += av[0] * bv;
                        s1 += av[1] * bv;
                        s2 += av[2] * bv;
                        s3 += av[3] * bv;
                    }
                    c0[n] = s0;
                    c1[n] = s1;
                    c2[n] = s2;
                    c3[n] = s3;
                }
            } else {
                for (int64_t r = 0; r < mrows; ++r) {
                    float* crow = c + (m + r) * N;
                    for (int64_t k = 0; k < K; ++k) {
                        float afs = a[k * M + m + r];
                        kernels::scalar::axpy(afs, b + k * N, crow, size_t(N));
                    }
                }
            }
        }
    });
}

void add(const float* a, const float* b, float* y, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] + b[i];
}

void sub(const float* a, const float* b, float* y, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] - b[i];
}

void mul(const float* a, const float* b, float* y, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) y[i] = a[i] * b[i];
}

void axpy(float alpha, const float* x, float* y, size_t n) {
    __m256 av = _mm256_set1_ps(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(float alpha, float* y, size_t n) {
    __m256 av = _mm256_set1_ps(alpha);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_mul_ps(av, _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] *= alpha;
}

float sum(const float* x, size_t n) {
    __m256 s = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) s = _mm256_add_ps(s, _mm256_loadu_ps(x + i));
    float r = hsum8(s);
    for (; i < n; ++i) r += x[i];
    return r;
}

float sumsq(const float* x, size_t n) {
    __m256 s = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        s = _mm256_fmadd_ps(v, v, s);
    }
    float r = hsum8(s);
    for (; i < n; ++i) r += x[i] * x[i];
    return r;
}

float dot(const float* a, const float* b, size_t n) {
    __m256 s = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        s = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), s);
    float r = hsum8(s);
    for (; i < n; ++i) r += a[i] * b[i];
    return r;
}

void gelu_fwd(const float* x, float* y, size_t n) {
    const __m256 c0 = _mm256_set1_ps(0.7978845608028654f);
    const __m256 c1 = _mm256_set1_ps(0.044715f);
    const __m256 half = _mm256_set1_ps(0.5f);
    const __m256 one = _mm256_set1_ps(1.0f);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        __m256 v3 = _mm256_mul_ps(v, _mm256_mul_ps(v, v));
        __m256 u = _mm256_mul_ps(c0, _mm256_fmadd_ps(c1, v3, v));
        __m256 t = tanh8(u);
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_mul_ps(half, v), _mm256_add_ps(one, t)));
    }
    if (i < n) scalar::gelu_fwd(x + i, y + i, n - i);
}

void gelu_bwd(const float* x, const float* dy, float* dx, size_t n) {
    const __m256 c0 = _mm256_set1_ps(0.7978845608028654f);
    const __m256 c1 = _mm256_set1_ps(0.044715f);
    const __m256 c13 = _mm256_set1_ps(3.0f * 0.044715f);
    const __m256 half = _mm256_set1_ps(0.5f);
    const __m256 one = _mm256_set1_ps(1.0f);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        __m256 v2 = _mm256_mul_ps(v, v);
        __m256 u = _mm256_mul_ps(c0, _mm256_fmadd_ps(c1, _mm256_mul_ps(v2, v), v));
        __m256 t = tanh8(u);
        __m256 du = _mm256_mul_ps(c0, _mm256_fmadd_ps(c13, v2, one));
        __m256 sech2 = _mm256_fnmadd_ps(t, t, one);
        __m256 g = _mm256_fmadd_ps(_mm256_mul_ps(half, v), _mm256_mul_ps(sech2, du),
                                   _mm256_mul_ps(half, _mm256_add_ps(one, t)));
        __m256 acc = _mm256_fmadd_ps(_mm256_loadu_ps(dy + i), g, _mm256_loadu_ps(dx + i));
        _mm256_storeu_ps(dx + i, acc);
    }
    if (i < n) scalar::gelu_bwd(x + i, dy + i, dx + i, n - i);
}

void softmax_row(const float* x, float* y, size_t n) {
    __m256 mx = _mm256_set1_ps(-INFINITY);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) mx = _mm256_max_ps(mx, _mm256_loadu_ps(x + i));
    alignas(32) float tmp[8];
    _mm256_store_ps(tmp, mx);
    float m = tmp[0];
    for (int j = 1; j < 8; ++j) m = std::max(m, tmp[j]);
    for (; i < n; ++i) m = std::max(m, x[i]);

    __m256 mv = _mm256_set1_ps(m);
    __m256 sv = _mm256_setzero_ps();
    i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 e = exp8(_mm256_sub_ps(_mm256_loadu_ps(x + i), mv));
        _mm256_storeu_ps(y + i, e);
        sv = _mm256_add_ps(sv, e);
    }
    float s = hsum8(sv);
    for (; i < n; ++i) {
        y[i] = std::exp(x[i] - m);
        s += y[i];
    }
    scale(1.0f / s, y, n);
}

#endif  // ANYRES_BUILD_AVX2

}  // namespace anyres::kernels::avx2
