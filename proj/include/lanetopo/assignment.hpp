#pragma once

// Exact bipartite matching: one-to-one assignment by shortest augmenting
// paths with potentials, and the one-to-many extension that assigns exactly
// K predictions per ground truth by row replication.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lanetopo/common.hpp"
#include "lanetopo/geometry.hpp"

namespace lanetopo {

// rows = ground truths, columns = predictions.
struct CostMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> c;  // row-major

    double at(int r, int j) const { return c[size_t(r) * cols + j]; }
    double& at(int r, int j) { return c[size_t(r) * cols + j]; }

    static CostMatrix zeros(int rows, int cols) {
        CostMatrix m;
        m.rows = rows;
        m.cols = cols;
        m.c.assign(size_t(rows) * cols, 0.0);
        return m;
    }
};

enum class AssignMode { o2o, o2m };

struct AssignmentResult {
    AssignMode mode = AssignMode::o2o;
    std::vector<int> sigma;                // o2o: sigma[p] = prediction index
    std::vector<std::vector<int>> sets;    // o2m: sets[p] = K prediction indices, ascending
    double total_cost = 0.0;
};

// Minimizes sum_p c[p][sigma(p)] over injective sigma. Requires cols >= rows.
// Cost ties between optimal assignments are resolved deterministically,
// preferring lower prediction indices (ascending-index scans with strict
// improvement).
inline AssignmentResult hungarian(const CostMatrix& cm) {
    if (cm.cols < cm.rows)
        throw UsageError("hungarian: need at least as many predictions (" +
                         std::to_string(cm.cols) + ") as ground truths (" +
                         std::to_string(cm.rows) + ")");
    for (double v : cm.c)
        if (!std::isfinite(v)) throw NumericError("hungarian: non-finite cost entry");

    const int n = cm.rows, m = cm.cols;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                double cur = cm.at(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    AssignmentResult res;
    res.mode = AssignMode::o2o;
    res.sigma.assign(n, -1);
    for (int j = 1; j <= m; ++j)
        if (p[j]) res.sigma[p[j] - 1] = j - 1;
    res.total_cost = 0.0;
    for (int i = 0; i < n; ++i) res.total_cost += cm.at(i, res.sigma[i]);
    return res;
}

// Exactly K positives per ground truth, each prediction used at most once.
// Realized by replicating each ground-truth row K times, solving the exact
// one-to-one problem, and regrouping columns by original row.
inline AssignmentResult one_to_many(const CostMatrix& cm, int k) {
    if (k < 1) throw UsageError("one_to_many: K must be >= 1");
    if (cm.cols < k * cm.rows)
        throw UsageError("one_to_many: need predictions >= K*ground_truths, got " +
                         std::to_string(cm.cols) + " < " + std::to_string(k) + "*" +
                         std::to_string(cm.rows));
    CostMatrix rep = CostMatrix::zeros(cm.rows * k, cm.cols);
    for (int p = 0; p < cm.rows; ++p)
        for (int r = 0; r < k; ++r)
            std::copy_n(cm.c.data() + size_t(p) * cm.cols, cm.cols,
                        rep.c.data() + size_t(p * k + r) * cm.cols);
    AssignmentResult inner = hungarian(rep);
    AssignmentResult res;
    res.mode = AssignMode::o2m;
    res.sets.assign(cm.rows, {});
    for (int r = 0; r < rep.rows; ++r) res.sets[r / k].push_back(inner.sigma[r]);
    for (auto& s : res.sets) std::sort(s.begin(), s.end());
    res.total_cost = inner.total_cost;
    return res;
}

// Positive-class focal term on the sigmoid probability, used as the
// classification part of the matching cost. Probabilities are clamped so
// entries stay finite.
inline double focal_pos_cost(double logit, double alpha = 0.25, double gamma = 2.0) {
    double p = 1.0 / (1.0 + std::exp(-logit));
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return alpha * std::pow(1.0 - p, gamma) * (-std::log(p));
}

inline double mean_l1(const Polyline3D& a, const Polyline3D& b) {
    if (a.size() != b.size()) throw ShapeError("mean_l1: point count mismatch");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i)
        for (int d = 0; d < 3; ++d) s += std::abs(a.points[i][d] - b.points[i][d]);
    return s / double(a.size() * 3);
}

inline double mean_l1_box(const BBox2D& a, const BBox2D& b) {
    return (std::abs(a.x_min - b.x_min) + std::abs(a.y_min - b.y_min) +
            std::abs(a.x_max - b.x_max) + std::abs(a.y_max - b.y_max)) /
           4.0;
}

// c[p][j] = w_cls * focal_pos_cost(logit_j) + w_reg * mean L1 between the
// predicted and ground-truth polylines. Weights mirror the detection loss
// weights.
inline CostMatrix lane_cost(const std::vector<double>& pred_logits,
                            const std::vector<Polyline3D>& pred_lanes,
                            const std::vector<Polyline3D>& gt_lanes, double w_cls = 1.0,
                            double w_reg = 1.0) {
    if (pred_logits.size() != pred_lanes.size())
        throw ShapeError("lane_cost: logit/lane count mismatch");
    if (gt_lanes.empty() || pred_lanes.empty())
        throw UsageError("lane_cost: predictions and ground truths must be non-empty");
    CostMatrix cm = CostMatrix::zeros(int(gt_lanes.size()), int(pred_lanes.size()));
    for (int p = 0; p < cm.rows; ++p)
        for (int j = 0; j < cm.cols; ++j)
            cm.at(p, j) = w_cls * focal_pos_cost(pred_logits[j]) +
                          w_reg * mean_l1(pred_lanes[j], gt_lanes[p]);
    return cm;
}

// As lane_cost plus a -GIoU term; one-to-one only. pred_logits holds one
// row of class logits per prediction; the classification cost reads the
// ground-truth attribute's logit.
inline CostMatrix traffic_cost(const std::vector<std::vector<double>>& pred_logits,
                               const std::vector<BBox2D>& pred_boxes,
                               const std::vector<BBox2D>& gt_boxes,
                               const std::vector<int>& gt_attrs, double w_cls = 1.0,
                               double w_reg = 1.0, double w_giou = 1.0) {
    if (pred_logits.size() != pred_boxes.size())
        throw ShapeError("traffic_cost: logit/box count mismatch");
    if (gt_boxes.size() != gt_attrs.size())
        throw ShapeError("traffic_cost: box/attr count mismatch");
    if (gt_boxes.empty() || pred_boxes.empty())
        throw UsageError("traffic_cost: predictions and ground truths must be non-empty");
    CostMatrix cm = CostMatrix::zeros(int(gt_boxes.size()), int(pred_boxes.size()));
    for (int q = 0; q < cm.rows; ++q)
        for (int j = 0; j < cm.cols; ++j)
            cm.at(q, j) = w_cls * focal_pos_cost(pred_logits[j][gt_attrs[q]]) +
                          w_reg * mean_l1_box(pred_boxes[j], gt_boxes[q]) -
                          w_giou * giou(pred_boxes[j], gt_boxes[q]);
    return cm;
}

}  // namespace lanetopo
