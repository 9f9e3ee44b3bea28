#include <doctest.h>

#include "lanetopo/gradcheck.hpp"
#include "lanetopo/tensor.hpp"

using namespace lanetopo;
using TD = Tensor<double>;

TEST_CASE("matmul identity and hand dot product") {
    TD eye({2, 2}, {1, 0, 0, 1});
    TD b({2, 2}, {1, 2, 3, 4});
    auto r = matmul(eye, b);
    CHECK(r.values() == std::vector<double>{1, 2, 3, 4});

    TD a({1, 2}, {1, 2});
    TD c({2, 1}, {3, 4});
    CHECK(matmul(a, c).value() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    TD a({2, 3}, {1, 2, 3, 4, 5, 6});
    TD b({2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
    try {
        matmul(a, b);
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("[2x2]") != std::string::npos);
    }
}

TEST_CASE("matmul gradient matches finite differences") {
    Rng rng(5);
    auto a = TD::randn({3, 4}, rng, 1.0, true);
    auto b = TD::randn({4, 2}, rng, 1.0, true);
    auto res = check_gradients({a, b}, [&] { return sum(matmul(a, b)); }, 1e-5, 1e-6);
    CHECK(res.ok);
}

TEST_CASE("layer_norm constant row maps to zeros; gamma=0 gives beta") {
    TD x({1, 4}, {5, 5, 5, 5});
    TD gamma({4}, {1, 1, 1, 1});
    TD beta({4}, {0, 0, 0, 0});
    auto y = layer_norm(x, gamma, beta, 1e-5);
    for (double v : y.values()) CHECK(v == doctest::Approx(0.0));

    TD g0({4}, {0, 0, 0, 0});
    TD b7({4}, {7, -1, 2, 0.5});
    TD x2({3, 4}, {1, 2, 3, 4, -1, 0, 1, 2, 9, 9, 1, 0});
    auto y2 = layer_norm(x2, g0, b7, 1e-5);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) CHECK(y2.at(r, c) == doctest::Approx(b7.values()[c]));
}

TEST_CASE("layer_norm rejects bad inputs") {
    TD x({1, 3}, {1, 2, std::numeric_limits<double>::quiet_NaN()});
    TD g({3}, {1, 1, 1});
    TD b({3}, {0, 0, 0});
    CHECK_THROWS_AS(layer_norm(x, g, b, 1e-5), NumericError);
    TD x2({1, 3}, {1, 2, 3});
    CHECK_THROWS_AS(layer_norm(x2, g, b, 0.0), ConfigError);
}

TEST_CASE("layer_norm gradcheck") {
    Rng rng(17);
    auto x = TD::randn({4, 6}, rng, 1.0, true);
    auto g = TD::randn({6}, rng, 1.0, true);
    auto b = TD::randn({6}, rng, 1.0, true);
    auto w = TD::randn({4, 6}, rng, 1.0, false);
    auto res = check_gradients({x, g, b},
                               [&] { return sum(mul(layer_norm(x, g, b, 1e-5), w)); }, 1e-5,
                               1e-5);
    CHECK(res.ok);
}

TEST_CASE("backward: sum gives ones, sum of squares gives 2x") {
    Rng rng(3);
    auto x = TD::randn({3, 3}, rng, 1.0, true);
    sum(x).backward();
    for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));

    x.zero_grad();
    sum(mul(x, x)).backward();
    for (size_t i = 0; i < x.numel(); ++i)
        CHECK(x.grad()[i] == doctest::Approx(2.0 * x.values()[i]));
}

TEST_CASE("backward accumulates across calls without reset") {
    TD x({2}, {1.0, 2.0}, true);
    auto build = [&] { return sum(x); };
    build().backward();
    build().backward();
    for (double g : x.grad()) CHECK(g == doctest::Approx(2.0));
}

TEST_CASE("backward requires scalar") {
    TD x({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(x.backward(), UsageError);
}

TEST_CASE("softmax rows are stochastic and masked entries are zero") {
    Rng rng(9);
    auto x = TD::randn({5, 7}, rng, 3.0, false);
    auto p = softmax_rows(x);
    for (int i = 0; i < 5; ++i) {
        double s = 0;
        for (int j = 0; j < 7; ++j) s += p.at(i, j);
        CHECK(std::abs(s - 1.0) < 1e-9);
    }
    std::vector<uint8_t> mask(35, 1);
    mask[3] = 0;
    auto pm = softmax_rows(x, &mask);
    CHECK(pm.at(0, 3) == 0.0);
    std::vector<uint8_t> dead(35, 1);
    for (int j = 0; j < 7; ++j) dead[7 + j] = 0;
    CHECK_THROWS_AS(softmax_rows(x, &dead), ConfigError);
}

TEST_CASE("elementwise and shape op gradcheck chain") {
    Rng rng(21);
    auto a = TD::randn({4, 5}, rng, 1.0, true);
    auto b = TD::randn({4, 5}, rng, 1.0, true);
    for (auto& v : b.mutable_values()) v += (v >= 0 ? 2.0 : -2.0);
    auto w = TD::randn({4, 5}, rng, 1.0, false);
    auto res = check_gradients(
        {a, b},
        [&] {
            auto y = add(div(a, b), mul(sigmoid(a), softplus(b)));
            y = add(y, min2(a, b));
            return sum(mul(y, w));
        },
        1e-5, 1e-5);
    CHECK(res.ok);
}

TEST_CASE("gather and concat route gradients to the right slots") {
    TD x({3, 2}, {1, 2, 3, 4, 5, 6}, true);
    auto g = gather_rows(x, {2, 0, 2});
    sum(g).backward();
    CHECK(x.grad() == std::vector<double>{1, 1, 0, 0, 2, 2});
}

TEST_CASE("pair_mlp_logits equals explicit concatenation MLP") {
    // logit(r,s) = w2 . act(A[r] + B[s] + b1) + b2 must match computing the
    // same two-layer MLP over [a_r ; b_s] with the first layer split.
    Rng rng(33);
    auto a = TD::randn({3, 4}, rng);
    auto b = TD::randn({2, 4}, rng);
    auto b1 = TD::randn({4}, rng);
    auto w2 = TD::randn({4}, rng);
    auto b2 = TD::randn({1}, rng);
    auto logits = pair_mlp_logits(a, b, b1, w2, b2);
    REQUIRE(logits.shape() == std::vector<int>{3, 2});
    auto act = [](double v) {
        double s = std::sqrt(2.0 / M_PI);
        return 0.5 * v * (1.0 + std::tanh(s * (v + 0.044715 * v * v * v)));
    };
    for (int r = 0; r < 3; ++r)
        for (int s = 0; s < 2; ++s) {
            double acc = b2.values()[0];
            for (int j = 0; j < 4; ++j)
                acc += w2.values()[j] * act(a.at(r, j) + b.at(s, j) + b1.values()[j]);
            CHECK(logits.at(r, s) == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("forward passes are bit-deterministic given seed") {
    auto run = [] {
        Rng rng(77);
        auto a = TD::randn({6, 6}, rng);
        auto b = TD::randn({6, 6}, rng);
        return matmul(gelu(a), softmax_rows(b)).values();
    };
    CHECK(run() == run());
}
