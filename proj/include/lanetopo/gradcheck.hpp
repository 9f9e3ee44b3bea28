#pragma once

// Central finite-difference verification of reverse-mode gradients.
// Generic over the loss builder, so it stays independent of any particular
// forward implementation. Used by the test suites and the `gradcheck` CLI.

#include <functional>
#include <string>
#include <vector>

#include "lanetopo/tensor.hpp"

namespace lanetopo {

struct GradCheckResult {
    bool ok = true;
    double max_rel_err = 0.0;
    std::string worst;  // "param_idx/elem analytic numeric"
};

// loss_builder must rebuild the scalar loss from the current leaf values on
// every call (forward passes here are pure functions of the leaves).
inline GradCheckResult check_gradients(std::vector<Tensor<double>> leaves,
                                       const std::function<Tensor<double>()>& loss_builder,
                                       double step = 1e-5, double tol = 1e-4) {
    GradCheckResult res;
    for (auto& l : leaves) l.zero_grad();
    auto loss = loss_builder();
    loss.backward();
    for (size_t pi = 0; pi < leaves.size(); ++pi) {
        auto& leaf = leaves[pi];
        std::vector<double> analytic =
            leaf.has_grad() ? leaf.grad() : std::vector<double>(leaf.numel(), 0.0);
        for (size_t e = 0; e < leaf.numel(); ++e) {
            const double orig = leaf.values()[e];
            leaf.mutable_values()[e] = orig + step;
            double fp = loss_builder().value();
            leaf.mutable_values()[e] = orig - step;
            double fm = loss_builder().value();
            leaf.mutable_values()[e] = orig;
            double numeric = (fp - fm) / (2.0 * step);
            // Floor keeps finite-difference roundoff on near-zero gradients
            // from registering as relative error.
            double denom = std::max({std::abs(analytic[e]), std::abs(numeric), 1e-2});
            double rel = std::abs(analytic[e] - numeric) / denom;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = "leaf " + std::to_string(pi) + " elem " + std::to_string(e) +
                            ": analytic=" + std::to_string(analytic[e]) +
                            " numeric=" + std::to_string(numeric);
            }
        }
    }
    res.ok = res.max_rel_err < tol;
    return res;
}

}  // namespace lanetopo
