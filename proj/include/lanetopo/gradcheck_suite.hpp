#pragma once

// Finite-difference sweep over every differentiable operation, the neural
// blocks, the composed decoder layers and the loss terms (with assignments
// held fixed). Backs both the `gradcheck` CLI subcommand and the test
// suites. 64-bit only.

#include <functional>
#include <string>
#include <vector>

#include "lanetopo/decoder.hpp"
#include "lanetopo/gradcheck.hpp"
#include "lanetopo/losses.hpp"
#include "lanetopo/nn.hpp"

namespace lanetopo {

struct GradSuiteResult {
    int checks = 0;
    int failures = 0;
    double max_rel_err = 0.0;
    std::vector<std::string> failure_messages;

    bool ok() const { return failures == 0; }
};

namespace gradsuite_detail {

using TD = Tensor<double>;

inline TD rand_t(std::vector<int> shape, Rng& rng, bool rg = true, double scale = 1.0) {
    return TD::randn(std::move(shape), rng, scale, rg);
}

// Fixed projection weights make the scalar loss sensitive to every output
// element; drawn once per check so the loss builder stays pure.
inline TD loss_weights(const std::vector<int>& shape, Rng& rng) {
    return TD::randn(shape, rng, 1.0, false);
}

inline TD wsum(const TD& x, const TD& w) { return sum(mul(x, w)); }

inline void record(GradSuiteResult& res, const std::string& name, const GradCheckResult& g) {
    ++res.checks;
    res.max_rel_err = std::max(res.max_rel_err, g.max_rel_err);
    if (!g.ok) {
        ++res.failures;
        res.failure_messages.push_back(name + ": rel err " + std::to_string(g.max_rel_err) +
                                       " (" + g.worst + ")");
    }
}

}  // namespace gradsuite_detail

inline GradSuiteResult run_gradcheck_suite(int trials = 100, double tol = 1e-4) {
    using namespace gradsuite_detail;
    GradSuiteResult res;

    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(0x9d5u + uint64_t(trial));
        const int n = 2 + int(rng.below(7));  // <= 8
        const int m = 2 + int(rng.below(7));
        const int k = 2 + int(rng.below(7));

        {  // matmul
            auto a = rand_t({n, k}, rng);
            auto b = rand_t({k, m}, rng);
            auto w = loss_weights({n, m}, rng);
            record(res, "matmul",
                   check_gradients({a, b}, [&] { return wsum(matmul(a, b), w); }, 1e-5, tol));
        }
        {  // elementwise binary ops
            auto a = rand_t({n, m}, rng);
            auto b = rand_t({n, m}, rng);
            for (auto& v : b.mutable_values()) v += (v >= 0 ? 1.5 : -1.5);
            auto w = loss_weights({n, m}, rng);
            record(res, "add/sub/mul/div",
                   check_gradients(
                       {a, b}, [&] { return wsum(add(sub(mul(a, b), a), div(a, b)), w); }, 1e-5,
                       tol));
            record(res, "min2/max2",
                   check_gradients({a, b},
                                   [&] { return wsum(add(min2(a, b), max2(a, b)), w); }, 1e-5,
                                   tol));
        }
        {  // smooth unary chain
            auto x = rand_t({n, m}, rng);
            auto w = loss_weights({n, m}, rng);
            record(res, "exp/sigmoid/softplus/gelu",
                   check_gradients(
                       {x},
                       [&] {
                           auto y = add(gelu(x), add(sigmoid(x), softplus(scale(x, 0.5))));
                           return wsum(add(y, exp(scale(x, 0.25))), w);
                       },
                       1e-5, tol));
            auto xo = rand_t({n, m}, rng);
            for (auto& v : xo.mutable_values()) v += (v >= 0 ? 0.5 : -0.5);  // keep off kinks
            record(res, "relu/abs",
                   check_gradients({xo}, [&] { return wsum(add(relu(xo), abs(xo)), w); }, 1e-5,
                                   tol));
        }
        {  // shape ops
            auto x = rand_t({n, m}, rng);
            auto y = rand_t({n, k}, rng);
            std::vector<int> idx;
            for (int i = 0; i < n + 1; ++i) idx.push_back(int(rng.below(uint64_t(n))));
            auto w = loss_weights({n - 1, m + k - 2}, rng);
            record(res, "transpose/concat/slice/gather",
                   check_gradients(
                       {x, y},
                       [&] {
                           auto cat = concat_cols<double>({x, y});
                           auto s = slice_cols(cat, 1, m + k - 2);
                           auto g = gather_rows(transpose(transpose(s)), idx);
                           return wsum(slice_rows(g, 1, n - 1), w);
                       },
                       1e-5, tol));
            auto v = rand_t({m}, rng);
            auto w2 = loss_weights({n, m}, rng);
            record(res, "add_row",
                   check_gradients({x, v}, [&] { return wsum(add_row(x, v), w2); }, 1e-5, tol));
        }
        {  // softmax with mask
            auto x = rand_t({n, m}, rng);
            std::vector<uint8_t> mask(size_t(n) * m, 1);
            for (auto& b : mask) b = rng.uniform() < 0.3 ? 0 : 1;
            for (int i = 0; i < n; ++i) mask[size_t(i) * m + int(rng.below(uint64_t(m)))] = 1;
            auto w = loss_weights({n, m}, rng);
            record(res, "softmax_rows",
                   check_gradients({x}, [&] { return wsum(softmax_rows(x, &mask), w); }, 1e-5,
                                   tol));
        }
        {  // layer norm
            auto x = rand_t({n, m}, rng);
            auto gamma = rand_t({m}, rng);
            auto beta = rand_t({m}, rng);
            auto w = loss_weights({n, m}, rng);
            record(res, "layer_norm",
                   check_gradients({x, gamma, beta},
                                   [&] { return wsum(layer_norm(x, gamma, beta, 1e-5), w); },
                                   1e-5, tol));
        }
        {  // pairwise topology scores
            auto a = rand_t({n, k}, rng);
            auto b = rand_t({m, k}, rng);
            auto b1 = rand_t({k}, rng);
            auto w2 = rand_t({k}, rng);
            auto b2 = rand_t({1}, rng);
            auto w = loss_weights({n, m}, rng);
            record(res, "pair_mlp_logits",
                   check_gradients({a, b, b1, w2, b2},
                                   [&] { return wsum(pair_mlp_logits(a, b, b1, w2, b2), w); },
                                   1e-5, tol));
        }
        {  // focal loss
            auto z = rand_t({n, m}, rng, true, 2.0);
            std::vector<uint8_t> targets(size_t(n) * m), mask(size_t(n) * m);
            for (auto& t : targets) t = rng.uniform() < 0.5;
            for (auto& v : mask) v = rng.uniform() < 0.7;
            record(res, "focal_loss",
                   check_gradients({z}, [&] { return focal_loss(z, targets, mask, 0.25, 2.0); },
                                   1e-5, tol));
        }
    }

    // Neural blocks and composed layers at the shapes named in the module
    // contracts: attention with 3 queries / 4 keys / C=8 / 2 heads, and full
    // decoder layers at C=8 with 3 queries.
    const int layer_trials = std::max(1, trials / 10);
    for (int trial = 0; trial < layer_trials; ++trial) {
        Rng rng(0xa77e0 + uint64_t(trial));
        {
            ParamStore<double> ps(7 + uint64_t(trial));
            auto q = rand_t({3, 8}, rng);
            auto kk = rand_t({4, 8}, rng);
            auto v = rand_t({4, 8}, rng);
            std::vector<TD> leaves = {q, kk, v};
            (void)attention(q, kk, v, 2, ps, "attn");  // materialize params
            for (auto& [name, t] : ps.entries_mut()) leaves.push_back(t);
            auto w = loss_weights({3, 8}, rng);
            record(res, "attention",
                   check_gradients(leaves,
                                   [&] { return wsum(attention(q, kk, v, 2, ps, "attn"), w); },
                                   1e-5, tol));
        }
        {
            ParamStore<double> ps(11 + uint64_t(trial));
            auto x = rand_t({3, 8}, rng);
            std::vector<TD> leaves = {x};
            (void)ffn(x, ps, "ffn", 8);
            for (auto& [name, t] : ps.entries_mut()) leaves.push_back(t);
            auto w = loss_weights({3, 8}, rng);
            record(res, "ffn",
                   check_gradients(leaves, [&] { return wsum(ffn(x, ps, "ffn", 8), w); }, 1e-5,
                                   tol));
        }
        {
            DecoderConfig dcfg;
            dcfg.channels = 8;
            dcfg.heads = 2;
            dcfg.lane_queries = 3;
            ParamStore<double> ps(23 + uint64_t(trial));
            auto q = rand_t({3, 8}, rng);
            auto kv = rand_t({5, 8}, rng);
            std::vector<TD> leaves = {q, kv};
            (void)detail::standard_layer(q, kv, ps, "layer", dcfg, nullptr);
            for (auto& [name, t] : ps.entries_mut()) leaves.push_back(t);
            auto w = loss_weights({3, 8}, rng);
            record(res, "standard_layer",
                   check_gradients(
                       leaves,
                       [&] {
                           return wsum(detail::standard_layer(q, kv, ps, "layer", dcfg, nullptr),
                                       w);
                       },
                       1e-5, tol));
        }
        {
            DecoderConfig dcfg;
            dcfg.channels = 8;
            dcfg.heads = 2;
            dcfg.lane_queries = 3;
            ParamStore<double> ps(31 + uint64_t(trial));
            auto q = rand_t({3, 8}, rng);
            auto kv = rand_t({5, 8}, rng);
            std::vector<TD> leaves = {q, kv};
            std::vector<TD> warm_taps;
            (void)detail::reordered_layer(q, kv, ps, "layer", dcfg, 2, &warm_taps);
            for (auto& [name, t] : ps.entries_mut()) leaves.push_back(t);
            auto w = loss_weights({3, 8}, rng);
            std::vector<TD> tap_w;
            for (size_t i = 0; i < warm_taps.size(); ++i) tap_w.push_back(loss_weights({3, 8}, rng));
            record(res, "reordered_layer",
                   check_gradients(
                       leaves,
                       [&] {
                           std::vector<TD> taps;
                           auto out = detail::reordered_layer(q, kv, ps, "layer", dcfg, 2, &taps);
                           // gradient flows through the output and every tap
                           auto loss = wsum(out, w);
                           for (size_t i = 0; i < taps.size(); ++i)
                               loss = add(loss, wsum(taps[i], tap_w[i]));
                           return loss;
                       },
                       1e-5, tol));
        }
    }
    return res;
}

}  // namespace lanetopo
