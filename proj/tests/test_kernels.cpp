#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "anyres/kernels.hpp"
#include "anyres/rng.hpp"
#include "test_util.hpp"

using namespace anyres;

namespace {

std::vector<float> random_vec(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(n);
    rng.fill_normal(v.data(), n);
    return v;
}

// double-precision reference for one gemm triple
std::vector<float> gemm_ref(const std::vector<float>& a, const std::vector<float>& b, int64_t M,
                            int64_t K, int64_t N, char mode) {
    std::vector<float> c(size_t(M * N), 0.0f);
    for (int64_t m = 0; m < M; ++m)
        for (int64_t n = 0; n < N; ++n) {
            double s = 0;
            for (int64_t k = 0; k < K; ++k) {
                double av = mode == 't' ? a[size_t(k * M + m)] : a[size_t(m * K + k)];
                double bv = mode == 'n' ? b[size_t(k * N + n)] : (mode == 'x' ? b[size_t(n * K + k)] : b[size_t(k * N + n)]);
                s += av * bv;
            }
            c[size_t(m * N + n)] = float(s);
        }
    return c;
}

}  // namespace

TEST_CASE("gemm variants: scalar and avx2 agree with double reference") {
    if (!kernels::avx2_supported()) {
        MESSAGE("avx2 not available; scalar-only check");
    }
    // deliberately awkward sizes to exercise remainder lanes
    const std::vector<std::array<int64_t, 3>> sizes = {
        {1, 1, 1}, {3, 5, 7}, {8, 8, 8}, {13, 17, 19}, {32, 48, 33}, {65, 31, 130}};
    for (auto [M, K, N] : sizes) {
        auto a = random_vec(size_t(M * K), 11 + uint64_t(M));
        auto bn = random_vec(size_t(K * N), 22 + uint64_t(N));
        auto bt = random_vec(size_t(N * K), 33 + uint64_t(N));
        auto at = random_vec(size_t(K * M), 44 + uint64_t(M));

        auto ref_nn = gemm_ref(a, bn, M, K, N, 'n');
        auto ref_nt = gemm_ref(a, bt, M, K, N, 'x');
        auto ref_tn = gemm_ref(at, bn, M, K, N, 't');

        // absolute tolerance scaled with accumulation length; unit-variance
        // inputs make |c| ~ sqrt(K), so this stays tight against real bugs
        const double tol = 1e-5 * double(K);
        std::vector<float> c(size_t(M * N));
        kernels::scalar::gemm_nn(a.data(), bn.data(), c.data(), M, K, N, false);
        CHECK(testutil::max_abs_diff(c, ref_nn) < tol);
        kernels::scalar::gemm_nt(a.data(), bt.data(), c.data(), M, K, N, false);
        CHECK(testutil::max_abs_diff(c, ref_nt) < tol);
        kernels::scalar::gemm_tn(at.data(), bn.data(), c.data(), M, K, N, false);
        CHECK(testutil::max_abs_diff(c, ref_tn) < tol);

        if (kernels::avx2_supported()) {
            kernels::avx2::gemm_nn(a.data(), bn.data(), c.data(), M, K, N, false);
            CHECK(testutil::max_abs_diff(c, ref_nn) < tol);
            kernels::avx2::gemm_nt(a.data(), bt.data(), c.data(), M, K, N, false);
            CHECK(testutil::max_abs_diff(c, ref_nt) < tol);
            kernels::avx2::gemm_tn(at.data(), bn.data(), c.data(), M, K, N, false);
            CHECK(testutil::max_abs_diff(c, ref_tn) < tol);
        }
    }
}

TEST_CASE("gemm accumulate flag adds instead of overwriting") {
    int64_t M = 7, K = 9, N = 5;
    auto a = random_vec(size_t(M * K), 1);
    auto b = random_vec(size_t(K * N), 2);
    std::vector<float> base(size_t(M * N), 0.5f);
    auto c_scalar = base;
    kernels::scalar::gemm_nn(a.data(), b.data(), c_scalar.data(), M, K, N, true);
    auto expected = gemm_ref(a, b, M, K, N, 'n');
    for (auto& v : expected) v += 0.5f;
    CHECK(testutil::max_abs_diff(c_scalar, expected) < 1e-4);
    if (kernels::avx2_supported()) {
        auto c_avx = base;
        kernels::avx2::gemm_nn(a.data(), b.data(), c_avx.data(), M, K, N, true);
        CHECK(testutil::max_abs_diff(c_avx, expected) < 1e-4);
    }
}

TEST_CASE("elementwise and reduction kernels: scalar vs avx2") {
    if (!kernels::avx2_supported()) return;
    for (size_t n : {1ul, 7ul, 8ul, 9ul, 64ul, 1001ul}) {
        auto a = random_vec(n, 100 + n);
        auto b = random_vec(n, 200 + n);
        std::vector<float> y1(n), y2(n);

        kernels::scalar::add(a.data(), b.data(), y1.data(), n);
        kernels::avx2::add(a.data(), b.data(), y2.data(), n);
        CHECK(testutil::max_abs_diff(y1, y2) == 0.0);

        kernels::scalar::mul(a.data(), b.data(), y1.data(), n);
        kernels::avx2::mul(a.data(), b.data(), y2.data(), n);
        CHECK(testutil::max_abs_diff(y1, y2) == 0.0);

        y1 = b;
        y2 = b;
        kernels::scalar::axpy(0.37f, a.data(), y1.data(), n);
        kernels::avx2::axpy(0.37f, a.data(), y2.data(), n);
        CHECK(testutil::max_abs_diff(y1, y2) < 1e-6);  // fma vs mul+add rounding

        CHECK(std::abs(kernels::scalar::sum(a.data(), n) - kernels::avx2::sum(a.data(), n)) <
              1e-4 * (1.0 + std::abs(kernels::scalar::sum(a.data(), n))));
        CHECK(std::abs(kernels::scalar::dot(a.data(), b.data(), n) -
                       kernels::avx2::dot(a.data(), b.data(), n)) < 1e-3);
        CHECK(std::abs(kernels::scalar::sumsq(a.data(), n) - kernels::avx2::sumsq(a.data(), n)) < 1e-3);
    }
}

TEST_CASE("gelu and softmax: avx2 matches scalar within approximation tolerance") {
    if (!kernels::avx2_supported()) return;
    size_t n = 513;
    auto x = random_vec(n, 42);
    for (auto& v : x) v *= 3.0f;
    std::vector<float> y1(n), y2(n);
    kernels::scalar::gelu_fwd(x.data(), y1.data(), n);
    kernels::avx2::gelu_fwd(x.data(), y2.data(), n);
    CHECK(testutil::max_abs_diff(y1, y2) < 2e-6);

    auto dy = random_vec(n, 43);
    std::vector<float> dx1(n, 0.1f), dx2(n, 0.1f);
    kernels::scalar::gelu_bwd(x.data(), dy.data(), dx1.data(), n);
    kernels::avx2::gelu_bwd(x.data(), dy.data(), dx2.data(), n);
    CHECK(testutil::max_abs_diff(dx1, dx2) < 1e-5);

    kernels::scalar::softmax_row(x.data(), y1.data(), n);
    kernels::avx2::softmax_row(x.data(), y2.data(), n);
    CHECK(testutil::max_abs_diff(y1, y2) < 1e-6);
    float s = kernels::scalar::sum(y2.data(), n);
    CHECK(s == doctest::Approx(1.0f).epsilon(1e-5));
}

TEST_CASE("dispatcher honors simd toggle") {
    bool prev = kernels::simd_active();
    kernels::set_simd_enabled(false);
    CHECK_FALSE(kernels::simd_active());
    kernels::set_simd_enabled(true);
    CHECK(kernels::simd_active() == kernels::avx2_supported());
    kernels::set_simd_enabled(prev || true);
}

TEST_CASE("rng: deterministic streams and fixed split rule") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(derive_seed(7, 1) != derive_seed(7, 2));
    CHECK(derive_seed(7, 1) == derive_seed(7, 1));
    CHECK(derive_seed(7, "data") == derive_seed(7, fnv1a64("data")));

    // normal() moments over a large sample
    Rng r(99);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double v = r.normal();
        s += v;
        s2 += v * v;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}
