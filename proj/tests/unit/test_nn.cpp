#include <doctest.h>

#include "lanetopo/gradcheck.hpp"
#include "lanetopo/nn.hpp"

using namespace lanetopo;
using TD = Tensor<double>;

TEST_CASE("param store: re-init with same seed is bit-identical, any creation order") {
    ParamStore<double> a(42), b(42);
    auto w1 = a.get_or_create("x.w", {4, 4}, Init::fan_in_uniform);
    auto w2 = a.get_or_create("y.w", {3, 4}, Init::fan_in_uniform);
    // reversed creation order
    auto v2 = b.get_or_create("y.w", {3, 4}, Init::fan_in_uniform);
    auto v1 = b.get_or_create("x.w", {4, 4}, Init::fan_in_uniform);
    CHECK(w1.values() == v1.values());
    CHECK(w2.values() == v2.values());
}

TEST_CASE("param store: shape conflict and name uniqueness") {
    ParamStore<double> ps(1);
    ps.get_or_create("p", {2, 2}, Init::zeros);
    CHECK_THROWS_AS(ps.get_or_create("p", {2, 3}, Init::zeros), ConfigError);
    CHECK(ps.size() == 1);
}

TEST_CASE("attention: identical key rows give identical outputs per query") {
    ParamStore<double> ps(7);
    Rng rng(3);
    auto q = TD::randn({5, 8}, rng);
    std::vector<double> krow(8);
    for (auto& v : krow) v = rng.normal();
    std::vector<double> kv_vals;
    for (int i = 0; i < 4; ++i) kv_vals.insert(kv_vals.end(), krow.begin(), krow.end());
    TD kv({4, 8}, kv_vals);
    auto out = attention(q, kv, kv, 2, ps, "attn");
    for (int r = 1; r < 5; ++r)
        for (int c = 0; c < 8; ++c)
            CHECK(out.at(r, c) == doctest::Approx(out.at(0, c)).epsilon(1e-12));
}

TEST_CASE("attention: internal softmax rows sum to one") {
    ParamStore<double> ps(9);
    Rng rng(5);
    auto q = TD::randn({3, 8}, rng);
    auto kv = TD::randn({6, 8}, rng);
    std::vector<TD> probs;
    attention(q, kv, kv, 4, ps, "attn", nullptr, &probs);
    REQUIRE(probs.size() == 4);
    for (const auto& p : probs)
        for (int i = 0; i < p.rows(); ++i) {
            double s = 0;
            for (int j = 0; j < p.cols(); ++j) s += p.at(i, j);
            CHECK(std::abs(s - 1.0) < 1e-9);
        }
}

TEST_CASE("attention: configuration errors") {
    ParamStore<double> ps(1);
    Rng rng(1);
    auto q = TD::randn({2, 6}, rng);
    CHECK_THROWS_AS(attention(q, q, q, 4, ps, "a"), ConfigError);  // 6 % 4 != 0
    auto q2 = TD::randn({2, 8}, rng);
    std::vector<uint8_t> mask(4, 0);  // 2x2 all-false row
    CHECK_THROWS_AS(attention(q2, q2, q2, 2, ps, "b", &mask), ConfigError);
}

TEST_CASE("attention gradcheck at 3 queries, 4 keys, C=8, heads=2") {
    ParamStore<double> ps(11);
    Rng rng(13);
    auto q = TD::randn({3, 8}, rng, 1.0, true);
    auto k = TD::randn({4, 8}, rng, 1.0, true);
    auto v = TD::randn({4, 8}, rng, 1.0, true);
    std::vector<TD> leaves = {q, k, v};
    (void)attention(q, k, v, 2, ps, "attn");
    for (auto& [name, t] : ps.entries_mut()) leaves.push_back(t);
    auto w = TD::randn({3, 8}, rng, 1.0, false);
    auto res = check_gradients(
        leaves, [&] { return sum(mul(attention(q, k, v, 2, ps, "attn"), w)); }, 1e-5, 1e-4);
    CHECK(res.ok);
}

TEST_CASE("ffn: zero weights give zero output; shape preserved") {
    ParamStore<double> ps(3);
    Rng rng(7);
    auto x = TD::randn({5, 6}, rng);
    auto warm = ffn(x, ps, "f", 6);
    CHECK(warm.shape() == std::vector<int>{5, 6});
    for (auto& [name, t] : ps.entries_mut())
        for (auto& v : t.mutable_values()) v = 0.0;
    auto out = ffn(x, ps, "f", 6);
    for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("ffn gradcheck") {
    ParamStore<double> ps(5);
    Rng rng(11);
    auto x = TD::randn({3, 4}, rng, 1.0, true);
    std::vector<TD> leaves = {x};
    (void)ffn(x, ps, "f", 4);
    for (auto& [name, t] : ps.entries_mut()) leaves.push_back(t);
    auto w = TD::randn({3, 4}, rng, 1.0, false);
    auto res = check_gradients(leaves, [&] { return sum(mul(ffn(x, ps, "f", 4), w)); }, 1e-5,
                               1e-5);
    CHECK(res.ok);
}
