#pragma once

// Classification / regression / topology losses and the weighted total
// objective. Everything returns scalar tensors in the autodiff graph.

#include <vector>

#include "lanetopo/assignment.hpp"
#include "lanetopo/decoder.hpp"
#include "lanetopo/supervision.hpp"

namespace lanetopo {

struct LossWeights {
    double lane = 1.0;       // lambda^l
    double traffic = 1.0;    // lambda^t
    double topo_ll = 5.0;    // lambda^ll
    double topo_lt = 5.0;    // lambda^lt
    double o2m = 2.0;        // lambda_o2m
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
};

namespace detail {
template <typename T>
Tensor<T> constant_like(const std::vector<uint8_t>& v, const std::vector<int>& shape) {
    std::vector<T> vals(v.size());
    for (size_t i = 0; i < v.size(); ++i) vals[i] = T(v[i]);
    return Tensor<T>(shape, std::move(vals));
}
}  // namespace detail

// Mean over masked entries of -alpha_t (1-p_t)^gamma log(p_t) with
// p = sigmoid(logit). Written in the softplus form
//   alpha_t * exp(-gamma * softplus(s)) * softplus(-s),  s = (2t-1) * logit,
// which is smooth and saturates without overflow. An empty mask yields 0
// and sets *warned_empty when provided.
template <typename T>
Tensor<T> focal_loss(const Tensor<T>& logits, const std::vector<uint8_t>& targets,
                     const std::vector<uint8_t>& mask, double alpha, double gamma,
                     bool* warned_empty = nullptr) {
    if (targets.size() != logits.numel() || mask.size() != logits.numel())
        throw ShapeError("focal_loss: target/mask size mismatch");
    int count = 0;
    for (uint8_t m : mask) count += m != 0;
    if (count == 0) {
        if (warned_empty) *warned_empty = true;
        return Tensor<T>::zeros({1});
    }
    std::vector<T> sign(targets.size()), at(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) {
        sign[i] = targets[i] ? T(1) : T(-1);
        at[i] = targets[i] ? T(alpha) : T(1.0 - alpha);
    }
    auto s = mul(logits, Tensor<T>(logits.shape(), std::move(sign)));
    auto focal_weight = exp(scale(softplus(s), T(-gamma)));
    auto ce = softplus(neg(s));
    auto term = mul(mul(Tensor<T>(logits.shape(), std::move(at)), focal_weight), ce);
    auto masked = mul(term, detail::constant_like<T>(mask, logits.shape()));
    return scale(sum(masked), T(1.0 / count));
}

namespace detail {

template <typename T>
Tensor<T> gt_lane_matrix(const SceneGraph& gt, int n_points) {
    std::vector<T> vals;
    vals.reserve(size_t(gt.n_lanes()) * n_points * 3);
    for (const auto& lane : gt.lanes) {
        if (lane.size() != n_points)
            throw ShapeError("loss: ground-truth lane has " + std::to_string(lane.size()) +
                             " points, expected " + std::to_string(n_points));
        for (const auto& p : lane.points)
            for (double c : p) vals.push_back(T(c));
    }
    return Tensor<T>({gt.n_lanes(), n_points * 3}, std::move(vals));
}

// Differentiable GIoU over row-aligned box matrices [n x 4] (x1,y1,x2,y2).
template <typename T>
Tensor<T> giou_rows(const Tensor<T>& a, const Tensor<T>& b) {
    auto ax1 = slice_cols(a, 0, 1), ay1 = slice_cols(a, 1, 1);
    auto ax2 = slice_cols(a, 2, 1), ay2 = slice_cols(a, 3, 1);
    auto bx1 = slice_cols(b, 0, 1), by1 = slice_cols(b, 1, 1);
    auto bx2 = slice_cols(b, 2, 1), by2 = slice_cols(b, 3, 1);
    auto ix = relu(sub(min2(ax2, bx2), max2(ax1, bx1)));
    auto iy = relu(sub(min2(ay2, by2), max2(ay1, by1)));
    auto inter = mul(ix, iy);
    auto area_a = mul(sub(ax2, ax1), sub(ay2, ay1));
    auto area_b = mul(sub(bx2, bx1), sub(by2, by1));
    auto uni = sub(add(area_a, area_b), inter);
    auto hull = mul(sub(max2(ax2, bx2), min2(ax1, bx1)), sub(max2(ay2, by2), min2(ay1, by1)));
    return sub(div(inter, uni), div(sub(hull, uni), hull));
}

}  // namespace detail

// Focal classification over all lane queries with sigma-defined positives,
// plus L1 over matched points. Unweighted; callers apply lambda^l.
template <typename T>
Tensor<T> lane_detection_term(const PredictionSet<T>& pred, const SceneGraph& gt,
                              const std::vector<int>& sigma, const LossWeights& w) {
    const int nq = pred.lane_logits.rows();
    std::vector<uint8_t> targets(nq, 0), mask(nq, 1);
    for (int p : sigma) targets[p] = 1;
    auto term = focal_loss(pred.lane_logits, targets, mask, w.focal_alpha, w.focal_gamma);
    if (!sigma.empty()) {
        auto matched = gather_rows(pred.lane_points, sigma);
        auto l1 = mean(abs(sub(matched, detail::gt_lane_matrix<T>(gt, gt.lanes[0].size()))));
        term = add(term, l1);
    }
    return term;
}

// Focal classification + box L1 + GIoU loss (1 - GIoU) over matched traffic
// predictions. Unweighted; callers apply lambda^t.
template <typename T>
Tensor<T> traffic_detection_term(const TrafficPredictions<T>& pred, const SceneGraph& gt,
                                 const std::vector<int>& sigma_t, const LossWeights& w) {
    const int nt = pred.logits.rows();
    std::vector<uint8_t> tcls(size_t(nt) * kTrafficClasses, 0),
        tmask(size_t(nt) * kTrafficClasses, 1);
    for (size_t q = 0; q < sigma_t.size(); ++q)
        tcls[size_t(sigma_t[q]) * kTrafficClasses + gt.traffic[q].attr] = 1;
    auto term = focal_loss(pred.logits, tcls, tmask, w.focal_alpha, w.focal_gamma);
    if (sigma_t.empty()) return term;
    std::vector<T> gt_boxes;
    for (const auto& te : gt.traffic) {
        gt_boxes.push_back(T(te.box.x_min));
        gt_boxes.push_back(T(te.box.y_min));
        gt_boxes.push_back(T(te.box.x_max));
        gt_boxes.push_back(T(te.box.y_max));
    }
    Tensor<T> gtb({int(gt.traffic.size()), 4}, std::move(gt_boxes));
    auto matched = gather_rows(pred.boxes, sigma_t);
    term = add(term, mean(abs(sub(matched, gtb))));
    auto giou_loss = mean(affine(detail::giou_rows(matched, gtb), T(-1), T(1)));
    return add(term, giou_loss);
}

// lambda^l * (focal cls + L1 over lanes) + lambda^t * (focal + L1 + GIoU
// over traffic).
template <typename T>
Tensor<T> detection_loss(const PredictionSet<T>& lane_pred,
                         const TrafficPredictions<T>& traffic_pred, const SceneGraph& gt,
                         const std::vector<int>& sigma, const std::vector<int>& sigma_t,
                         const LossWeights& w) {
    auto loss = scale(lane_detection_term(lane_pred, gt, sigma, w), T(w.lane));
    if (traffic_pred.logits.rows() > 0 && !sigma_t.empty())
        loss = add(loss,
                   scale(traffic_detection_term(traffic_pred, gt, sigma_t, w), T(w.traffic)));
    return loss;
}

// lambda^ll * focal over the LL valid mask + lambda^lt * focal over the LT
// valid mask. Empty masks contribute 0.
template <typename T>
Tensor<T> topo_loss_o2o(const Tensor<T>& topo_ll, const Tensor<T>& topo_lt,
                        const SupervisionTarget& target_ll, const SupervisionTarget& target_lt,
                        const LossWeights& w) {
    auto ll = focal_loss(topo_ll, target_ll.z, target_ll.valid, w.focal_alpha, w.focal_gamma);
    auto loss = scale(ll, T(w.topo_ll));
    if (topo_lt.numel() > 0) {
        auto lt =
            focal_loss(topo_lt, target_lt.z, target_lt.valid, w.focal_alpha, w.focal_gamma);
        loss = add(loss, scale(lt, T(w.topo_lt)));
    }
    return loss;
}

enum class AuxReduce { sum, mean };

// Auxiliary one-to-many topology loss: per-tap focal terms accumulated over
// all taps (each tap carries its own supervision target computed from its
// own assignment).
template <typename T>
Tensor<T> topo_loss_o2m(const std::vector<PredictionSet<T>>& tap_preds,
                        const std::vector<SupervisionTarget>& targets_ll,
                        const std::vector<SupervisionTarget>& targets_lt, const LossWeights& w,
                        AuxReduce reduce = AuxReduce::sum) {
    if (tap_preds.size() != targets_ll.size() || tap_preds.size() != targets_lt.size())
        throw UsageError("topo_loss_o2m: one supervision target pair per tap required");
    auto loss = Tensor<T>::zeros({1});
    for (size_t i = 0; i < tap_preds.size(); ++i)
        loss = add(loss, topo_loss_o2o(tap_preds[i].topo_ll, tap_preds[i].topo_lt,
                                       targets_ll[i], targets_lt[i], w));
    if (reduce == AuxReduce::mean && !tap_preds.empty())
        loss = scale(loss, T(1.0 / double(tap_preds.size())));
    return loss;
}

// L = L_det_o2o + L_topo_o2o + lambda_o2m * L_topo_o2m
template <typename T>
Tensor<T> total_loss(const Tensor<T>& det_o2o, const Tensor<T>& topo_o2o,
                     const Tensor<T>& topo_o2m, const LossWeights& w) {
    return add(add(det_o2o, topo_o2o), scale(topo_o2m, T(w.o2m)));
}

}  // namespace lanetopo
