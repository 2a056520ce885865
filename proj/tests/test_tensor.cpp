#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "anyres/tensor.hpp"
#include "test_util.hpp"

using namespace anyres;
using testutil::check_gradients;

namespace {

Tensor<double> param(Shape s, Rng& rng) { return Tensor<double>::randn(std::move(s), rng, 0.5, true); }

}  // namespace

TEST_CASE("autodiff: elementwise chain") {
    Rng rng(1);
    auto a = param({3, 4}, rng);
    auto b = param({3, 4}, rng);
    auto f = [&] { return mean_all(mul(add(a, b), sub(a, mul_scalar(b, 2.0)))); };
    auto res = check_gradients(f, {{"a", &a, false}, {"b", &b, false}});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("autodiff: matmul and matmul_nt") {
    Rng rng(2);
    auto a = param({5, 3}, rng);
    auto w = param({3, 4}, rng);
    auto k = param({6, 3}, rng);
    auto f = [&] { return mean_all(matmul(a, w)); };
    CHECK(check_gradients(f, {{"a", &a, false}, {"w", &w, false}}).max_rel_err < 1e-6);
    auto g = [&] { return mean_all(gelu(matmul_nt(a, k))); };
    CHECK(check_gradients(g, {{"a", &a, false}, {"k", &k, false}}).max_rel_err < 1e-6);
}

TEST_CASE("autodiff: shared node accumulates gradient from both consumers") {
    Rng rng(3);
    auto a = param({4, 4}, rng);
    auto f = [&] { return mean_all(add(mul(a, a), mul_scalar(a, 3.0))); };
    CHECK(check_gradients(f, {{"a", &a, false}}).max_rel_err < 1e-6);
}

TEST_CASE("autodiff: layernorm, softmax, gelu") {
    Rng rng(4);
    auto x = param({6, 5}, rng);
    auto f = [&] { return mean_all(mul(layernorm_rows(x), layernorm_rows(x))); };
    CHECK(check_gradients(f, {{"x", &x, false}}).max_rel_err < 1e-5);
    auto g = [&] { return mean_all(mul(softmax_rows(x), x)); };
    CHECK(check_gradients(g, {{"x", &x, false}}).max_rel_err < 1e-5);
}

TEST_CASE("autodiff: broadcast and modulation ops") {
    Rng rng(5);
    auto x = param({2, 3, 4}, rng);  // viewed as 6 rows x 4 cols
    auto v = param({4}, rng);
    auto s = param({2, 4}, rng);
    auto b = param({2, 4}, rng);
    auto f = [&] { return mean_all(gelu(add_rowvec(x, v))); };
    CHECK(check_gradients(f, {{"x", &x, false}, {"v", &v, false}}).max_rel_err < 1e-6);
    auto g = [&] { return mean_all(mul(rows_scale_shift(x, s, b, 3), x)); };
    CHECK(check_gradients(g, {{"x", &x, false}, {"s", &s, false}, {"b", &b, false}}).max_rel_err < 1e-6);
}

TEST_CASE("autodiff: concat/slice/reshape round trips") {
    Rng rng(6);
    auto a = param({3, 2}, rng);
    auto b = param({3, 3}, rng);
    auto f = [&] {
        auto cat = concat_cols(a, b);
        auto back = slice_cols(cat, 2, 3);
        return mean_all(mul(back, back));
    };
    CHECK(check_gradients(f, {{"a", &a, false}, {"b", &b, false}}).max_rel_err < 1e-6);

    auto g = [&] {
        auto row = slice_rows(concat_rows(a, reshape(a, Shape{3, 2})), 1, 4);
        return mean_all(mul(row, row));
    };
    CHECK(check_gradients(g, {{"a", &a, false}}).max_rel_err < 1e-6);
}

TEST_CASE("autodiff: embedding lookup") {
    Rng rng(7);
    auto table = param({5, 3}, rng);
    std::vector<int> ids = {0, 2, 2, 4};
    auto f = [&] {
        auto e = embedding_rows(table, ids);
        return mean_all(mul(e, e));
    };
    CHECK(check_gradients(f, {{"table", &table, false}}).max_rel_err < 1e-6);
    CHECK_THROWS_AS(embedding_rows(table, std::vector<int>{5}), std::invalid_argument);
}

TEST_CASE("autodiff: conv2d stride 1 and stride 2") {
    Rng rng(8);
    auto x = param({2, 4, 5, 3}, rng);
    auto w = param({9 * 3, 2}, rng);
    auto b = param({2}, rng);
    auto f = [&] { return mean_all(mul(conv2d(x, w, b, 3, 1, 1), conv2d(x, w, b, 3, 1, 1))); };
    CHECK(check_gradients(f, {{"x", &x, false}, {"w", &w, false}, {"b", &b, false}}).max_rel_err < 1e-5);

    auto x2 = param({1, 4, 4, 2}, rng);
    auto w2 = param({9 * 2, 3}, rng);
    auto b2 = param({3}, rng);
    auto g = [&] {
        auto y = conv2d(x2, w2, b2, 3, 2, 1);
        CHECK(y.shape() == Shape{1, 2, 2, 3});
        return mean_all(mul(y, y));
    };
    CHECK(check_gradients(g, {{"x", &x2, false}, {"w", &w2, false}, {"b", &b2, false}}).max_rel_err < 1e-5);
}

TEST_CASE("autodiff: upsample and bilinear resize") {
    Rng rng(9);
    auto x = param({1, 3, 3, 2}, rng);
    auto f = [&] {
        auto y = upsample_nearest2x(x);
        CHECK(y.shape() == Shape{1, 6, 6, 2});
        return mean_all(mul(y, y));
    };
    CHECK(check_gradients(f, {{"x", &x, false}}).max_rel_err < 1e-6);
    auto g = [&] { return mean_all(mul(bilinear_resize(x, 7, 5), bilinear_resize(x, 7, 5))); };
    CHECK(check_gradients(g, {{"x", &x, false}}).max_rel_err < 1e-6);
}

TEST_CASE("bilinear resize: frozen 2x2 -> 4x4 oracle and identity at same size") {
    auto x = Tensor<double>::from({1, 2, 2, 1}, {1, 2, 3, 4});
    auto y = bilinear_resize(x, 4, 4);
    // half-pixel centers with edge clamp
    const std::vector<double> expected = {1, 1.25, 1.75, 2, 1.5, 1.75, 2.25, 2.5,
                                          2.5, 2.75, 3.25, 3.5, 3, 3.25, 3.75, 4};
    for (size_t i = 0; i < expected.size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(expected[i]).epsilon(1e-12));

    auto same = bilinear_resize(x, 2, 2);
    for (int i = 0; i < 4; ++i) CHECK(same.data()[i] == x.data()[i]);
}

TEST_CASE("no-grad mode skips graph construction") {
    Rng rng(10);
    auto a = param({2, 2}, rng);
    NoGradGuard ng;
    auto y = mul(a, a);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
}

TEST_CASE("shape errors throw invalid_argument") {
    auto a = Tensor<float>::zeros({2, 3});
    auto b = Tensor<float>::zeros({3, 3});
    CHECK_THROWS_AS(add(a, b), std::invalid_argument);
    CHECK_THROWS_AS(matmul(a, Tensor<float>::zeros({4, 2})), std::invalid_argument);
    CHECK_THROWS_AS(slice_cols(a, 2, 5), std::invalid_argument);
}

TEST_CASE("backward on non-scalar is rejected") {
    auto a = Tensor<float>::zeros({2, 2}, true);
    auto y = mul(a, a);
    CHECK_THROWS_AS(y.backward(), std::invalid_argument);
}
