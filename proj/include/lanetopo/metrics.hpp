#pragma once

// Desk-scale evaluation: lane / traffic detection AP, topology AP over
// matched vertices, and the combined scalar score
// ols = 1/4 (det_l + det_t + sqrt(top_ll) + sqrt(top_lt)).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lanetopo/geometry.hpp"
#include "lanetopo/scene.hpp"

namespace lanetopo {

// Value-typed predictions for one scene.
struct ScenePredictions {
    std::vector<Polyline3D> lanes;
    std::vector<double> lane_conf;
    std::vector<BBox2D> boxes;
    std::vector<int> box_class;
    std::vector<double> box_conf;
    std::vector<std::vector<double>> ll_conf;  // [n_lanes][n_lanes]
    std::vector<std::vector<double>> lt_conf;  // [n_lanes][n_boxes]
};

struct SceneScores {
    double det_l = 0, det_t = 0, top_ll = 0, top_lt = 0, ols = 0;
};

struct MetricsReport {
    double det_l = 0, det_t = 0, top_ll = 0, top_lt = 0, ols = 0;
    int matched_lanes = 0, total_gt_lanes = 0;
    int matched_traffic = 0, total_gt_traffic = 0;
    std::vector<SceneScores> per_scene;
};

inline double ols(double det_l, double det_t, double top_ll, double top_lt) {
    for (double v : {det_l, det_t, top_ll, top_lt})
        if (!(v >= 0.0 && v <= 1.0))
            throw UsageError("ols: inputs must lie in [0,1], got " + std::to_string(v));
    return 0.25 * (det_l + det_t + std::sqrt(top_ll) + std::sqrt(top_lt));
}

namespace detail {

struct Ranked {
    double conf;
    bool tp;
};

// All-point interpolated average precision. Ties in confidence keep input
// order, so later (higher-index) predictions rank later.
inline double average_precision(std::vector<Ranked> entries, int n_gt) {
    if (n_gt == 0) return entries.empty() ? 1.0 : 0.0;
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Ranked& a, const Ranked& b) { return a.conf > b.conf; });
    const int n = int(entries.size());
    std::vector<double> precision(n);
    int tp = 0;
    for (int k = 0; k < n; ++k) {
        tp += entries[k].tp;
        precision[k] = double(tp) / double(k + 1);
    }
    // precision envelope from the right
    for (int k = n - 2; k >= 0; --k) precision[k] = std::max(precision[k], precision[k + 1]);
    double ap = 0.0;
    for (int k = 0; k < n; ++k)
        if (entries[k].tp) ap += precision[k];
    return ap / double(n_gt);
}

// Greedy confidence-ordered matching: predictions in descending confidence
// claim their closest unmatched ground truth within the threshold. Returns
// pred -> gt (or -1).
template <typename DistFn>
std::vector<int> greedy_match(const std::vector<double>& conf, int n_pred, int n_gt,
                              DistFn dist, double threshold) {
    std::vector<int> order(n_pred);
    for (int i = 0; i < n_pred; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return conf[a] > conf[b]; });
    std::vector<uint8_t> used(n_gt, 0);
    std::vector<int> match(n_pred, -1);
    for (int pi : order) {
        double best = std::numeric_limits<double>::infinity();
        int best_gt = -1;
        for (int g = 0; g < n_gt; ++g) {
            if (used[g]) continue;
            double d = dist(pi, g);
            if (d <= threshold && d < best) {
                best = d;
                best_gt = g;
            }
        }
        if (best_gt >= 0) {
            used[best_gt] = 1;
            match[pi] = best_gt;
        }
    }
    return match;
}

}  // namespace detail

// Streaming accumulator: predictions and ground truths pool across scenes,
// and a single PR sweep per metric produces the final report.
class MetricsAccumulator {
  public:
    void add_scene(const ScenePredictions& pred, const SceneGraph& gt) {
        SceneScores ss = score_scene(pred, gt, this);
        ss.ols = ols(ss.det_l, ss.det_t, ss.top_ll, ss.top_lt);
        per_scene_.push_back(ss);
    }

    MetricsReport finalize() const {
        MetricsReport r;
        double acc = 0.0;
        for (int t = 0; t < 3; ++t)
            acc += detail::average_precision(lane_entries_[t], lane_gt_);
        r.det_l = acc / 3.0;
        if (traffic_cls_.empty()) {
            r.det_t = traffic_pred_seen_ ? 0.0 : 1.0;
        } else {
            double s = 0.0;
            for (const auto& [cls, pool] : traffic_cls_)
                s += detail::average_precision(pool.entries, pool.n_gt);
            r.det_t = s / double(traffic_cls_.size());
        }
        r.top_ll = top_ap(ll_edges_, ll_gt_);
        r.top_lt = top_ap(lt_edges_, lt_gt_);
        r.ols = ols(r.det_l, r.det_t, r.top_ll, r.top_lt);
        r.matched_lanes = matched_lanes_;
        r.total_gt_lanes = lane_gt_;
        r.matched_traffic = matched_traffic_;
        r.total_gt_traffic = traffic_gt_total_;
        r.per_scene = per_scene_;
        return r;
    }

  private:
    struct ClassPool {
        std::vector<detail::Ranked> entries;
        int n_gt = 0;
    };

    static double top_ap(const std::vector<detail::Ranked>& edges, int n_gt) {
        if (n_gt == 0) return edges.empty() ? 1.0 : 0.0;
        return detail::average_precision(edges, n_gt);
    }

    // Scores one scene and, when acc is non-null, also feeds the pooled
    // accumulators. Vertex matching for the topology metrics runs at the
    // tightest detection operating point (1.0 m Frechet / 0.75 IoU).
    static SceneScores score_scene(const ScenePredictions& pred, const SceneGraph& gt,
                                   MetricsAccumulator* acc) {
        SceneScores ss;
        const int np = int(pred.lanes.size());
        const int ng = gt.n_lanes();

        // Lane detection over Frechet thresholds {1, 2, 3} m.
        std::vector<std::vector<double>> dmat(np, std::vector<double>(ng, 0.0));
        for (int i = 0; i < np; ++i)
            for (int g = 0; g < ng; ++g) dmat[i][g] = frechet(pred.lanes[i], gt.lanes[g]);
        const double frechet_thresholds[3] = {1.0, 2.0, 3.0};
        std::vector<int> vertex_match;  // at the 1.0 m point
        double det_l_acc = 0.0;
        for (int t = 0; t < 3; ++t) {
            auto match = detail::greedy_match(
                pred.lane_conf, np, ng, [&](int p, int g) { return dmat[p][g]; },
                frechet_thresholds[t]);
            if (t == 0) vertex_match = match;
            std::vector<detail::Ranked> entries;
            for (int i = 0; i < np; ++i) entries.push_back({pred.lane_conf[i], match[i] >= 0});
            det_l_acc += detail::average_precision(entries, ng);
            if (acc) {
                acc->lane_entries_[t].insert(acc->lane_entries_[t].end(), entries.begin(),
                                             entries.end());
            }
        }
        ss.det_l = det_l_acc / 3.0;
        if (acc) {
            acc->lane_gt_ += ng;
            for (int m : vertex_match) acc->matched_lanes_ += m >= 0;
        }

        // Traffic detection: AP at IoU 0.75, per attribute class present in
        // the ground truth, matching within the class only.
        const int nt = int(pred.boxes.size());
        std::map<int, ClassPool> cls_pools;
        for (const auto& te : gt.traffic) cls_pools[te.attr].n_gt += 1;
        std::vector<int> traffic_vertex_match(nt, -1);
        for (auto& [cls, pool] : cls_pools) {
            std::vector<int> pidx, gidx;
            for (int i = 0; i < nt; ++i)
                if (pred.box_class[i] == cls) pidx.push_back(i);
            for (int g = 0; g < gt.n_traffic(); ++g)
                if (gt.traffic[g].attr == cls) gidx.push_back(g);
            std::vector<double> conf;
            for (int i : pidx) conf.push_back(pred.box_conf[i]);
            auto match = detail::greedy_match(
                conf, int(pidx.size()), int(gidx.size()),
                [&](int p, int g) { return 1.0 - iou(pred.boxes[pidx[p]], gt.traffic[gidx[g]].box); },
                1.0 - 0.75);
            for (size_t i = 0; i < pidx.size(); ++i) {
                pool.entries.push_back({conf[i], match[i] >= 0});
                if (match[i] >= 0) traffic_vertex_match[pidx[i]] = gidx[match[i]];
            }
        }
        if (cls_pools.empty()) {
            ss.det_t = nt == 0 ? 1.0 : 0.0;
        } else {
            double s = 0.0;
            for (auto& [cls, pool] : cls_pools) s += detail::average_precision(pool.entries, pool.n_gt);
            ss.det_t = s / double(cls_pools.size());
        }
        if (acc) {
            acc->traffic_gt_total_ += gt.n_traffic();
            acc->traffic_pred_seen_ = acc->traffic_pred_seen_ || nt > 0;
            for (auto& [cls, pool] : cls_pools) {
                auto& dst = acc->traffic_cls_[cls];
                dst.n_gt += pool.n_gt;
                dst.entries.insert(dst.entries.end(), pool.entries.begin(), pool.entries.end());
            }
            for (int m : traffic_vertex_match) acc->matched_traffic_ += m >= 0;
        }

        // Topology: predicted edges between matched vertices with confidence
        // above 0.5 enter the ranking; ground-truth edges with an unmatched
        // endpoint stay in the recall denominator as unrecoverable misses.
        auto topo_edges = [&](const std::vector<int>& row_match,
                              const std::vector<int>& col_match, const TopoMatrix& g,
                              const std::vector<std::vector<double>>& conf,
                              std::vector<detail::Ranked>& out, int& gt_edges) {
            gt_edges = 0;
            for (int p = 0; p < g.rows; ++p)
                for (int q = 0; q < g.cols; ++q) gt_edges += g.at(p, q) != 0;
            for (size_t r = 0; r < row_match.size(); ++r) {
                if (row_match[r] < 0) continue;
                for (size_t s = 0; s < col_match.size(); ++s) {
                    if (col_match[s] < 0) continue;
                    if (&row_match == &col_match && r == s) continue;
                    double c = conf[r][s];
                    if (c <= 0.5) continue;
                    out.push_back({c, g.at(row_match[r], col_match[s]) != 0});
                }
            }
        };
        std::vector<detail::Ranked> ll_edges, lt_edges;
        int ll_gt = 0, lt_gt = 0;
        topo_edges(vertex_match, vertex_match, gt.g_ll, pred.ll_conf, ll_edges, ll_gt);
        topo_edges(vertex_match, traffic_vertex_match, gt.g_lt, pred.lt_conf, lt_edges, lt_gt);
        ss.top_ll = top_ap(ll_edges, ll_gt);
        ss.top_lt = top_ap(lt_edges, lt_gt);
        if (acc) {
            acc->ll_gt_ += ll_gt;
            acc->lt_gt_ += lt_gt;
            acc->ll_edges_.insert(acc->ll_edges_.end(), ll_edges.begin(), ll_edges.end());
            acc->lt_edges_.insert(acc->lt_edges_.end(), lt_edges.begin(), lt_edges.end());
        }
        return ss;
    }

    std::vector<detail::Ranked> lane_entries_[3];
    int lane_gt_ = 0;
    int matched_lanes_ = 0;
    std::map<int, ClassPool> traffic_cls_;
    bool traffic_pred_seen_ = false;
    int traffic_gt_total_ = 0;
    int matched_traffic_ = 0;
    std::vector<detail::Ranked> ll_edges_, lt_edges_;
    int ll_gt_ = 0, lt_gt_ = 0;
    std::vector<SceneScores> per_scene_;
};

inline nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["det_l"] = r.det_l;
    j["det_t"] = r.det_t;
    j["top_ll"] = r.top_ll;
    j["top_lt"] = r.top_lt;
    j["ols"] = r.ols;
    j["counts"] = {{"matched_lanes", r.matched_lanes},
                   {"total_gt_lanes", r.total_gt_lanes},
                   {"matched_traffic", r.matched_traffic},
                   {"total_gt_traffic", r.total_gt_traffic}};
    j["per_scene"] = nlohmann::json::array();
    for (const auto& s : r.per_scene)
        j["per_scene"].push_back({{"det_l", s.det_l},
                                  {"det_t", s.det_t},
                                  {"top_ll", s.top_ll},
                                  {"top_lt", s.top_lt},
                                  {"ols", s.ols}});
    return j;
}

inline std::string report_to_csv(const MetricsReport& r) {
    std::string csv = "scene,det_l,det_t,top_ll,top_lt,ols\n";
    char buf[160];
    for (size_t i = 0; i < r.per_scene.size(); ++i) {
        const auto& s = r.per_scene[i];
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", i, s.det_l, s.det_t,
                      s.top_ll, s.top_lt, s.ols);
        csv += buf;
    }
    std::snprintf(buf, sizeof(buf), "all,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.det_l, r.det_t, r.top_ll,
                  r.top_lt, r.ols);
    csv += buf;
    return csv;
}

}  // namespace lanetopo
