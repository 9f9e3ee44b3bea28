#pragma once

// Projection of ground-truth topology matrices onto prediction index space
// under one-to-one and one-to-many assignment, producing binary target
// matrices with validity masks selecting the entries that receive loss.

#include <cstdint>
#include <vector>

#include "lanetopo/common.hpp"

namespace lanetopo {

enum class SupervisionRegime { full, valid_only };

struct SupervisionTarget {
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> z;      // binary targets, row-major
    std::vector<uint8_t> valid;  // entries that receive loss

    uint8_t z_at(int r, int s) const { return z[size_t(r) * cols + s]; }
    uint8_t valid_at(int r, int s) const { return valid[size_t(r) * cols + s]; }

    static SupervisionTarget empty(int rows, int cols) {
        SupervisionTarget t;
        t.rows = rows;
        t.cols = cols;
        t.z.assign(size_t(rows) * cols, 0);
        t.valid.assign(size_t(rows) * cols, 0);
        return t;
    }
};

// Binary ground-truth topology matrix (lane-lane or lane-traffic).
struct TopoMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> m;

    uint8_t at(int p, int q) const { return m[size_t(p) * cols + q]; }
    uint8_t& at(int p, int q) { return m[size_t(p) * cols + q]; }

    static TopoMatrix zeros(int rows, int cols) {
        TopoMatrix t;
        t.rows = rows;
        t.cols = cols;
        t.m.assign(size_t(rows) * cols, 0);
        return t;
    }
};

namespace detail {
inline void check_indices(const std::vector<int>& sigma, int n_pred, const char* what) {
    std::vector<uint8_t> seen(n_pred, 0);
    for (int s : sigma) {
        if (s < 0 || s >= n_pred)
            throw UsageError(std::string(what) + ": index " + std::to_string(s) +
                             " out of range [0," + std::to_string(n_pred) + ")");
        if (seen[s]++) throw UsageError(std::string(what) + ": indices not injective");
    }
}
}  // namespace detail

// General one-to-one projection with separate row and column assignments.
// z[row_sigma(p)][col_sigma(q)] = g[p][q]; everything else 0. Under full
// supervision every entry is valid; under valid-only supervision exactly the
// row_sigma x col_sigma product set is.
inline SupervisionTarget project_o2o(const TopoMatrix& g, const std::vector<int>& row_sigma,
                                     const std::vector<int>& col_sigma, int n_pred_rows,
                                     int n_pred_cols, SupervisionRegime regime) {
    if (int(row_sigma.size()) != g.rows || int(col_sigma.size()) != g.cols)
        throw UsageError("project_o2o: assignment length does not match topology matrix");
    detail::check_indices(row_sigma, n_pred_rows, "project_o2o rows");
    detail::check_indices(col_sigma, n_pred_cols, "project_o2o cols");
    SupervisionTarget t = SupervisionTarget::empty(n_pred_rows, n_pred_cols);
    for (int p = 0; p < g.rows; ++p)
        for (int q = 0; q < g.cols; ++q)
            t.z[size_t(row_sigma[p]) * n_pred_cols + col_sigma[q]] = g.at(p, q);
    if (regime == SupervisionRegime::full) {
        t.valid.assign(t.valid.size(), 1);
    } else {
        for (int p = 0; p < g.rows; ++p)
            for (int q = 0; q < g.cols; ++q)
                t.valid[size_t(row_sigma[p]) * n_pred_cols + col_sigma[q]] = 1;
    }
    return t;
}

// Square lane-lane convenience overload: one assignment indexes both sides.
inline SupervisionTarget project_o2o(const TopoMatrix& g, const std::vector<int>& sigma,
                                     int n_pred, SupervisionRegime regime) {
    return project_o2o(g, sigma, sigma, n_pred, n_pred, regime);
}

// One-to-many projection. For lane-lane, rows and columns both expand to the
// per-ground-truth positive sets: z[r][s] = g[p][q] for every r in set(p),
// s in set(q), and the valid mask covers exactly those cross products. For
// lane-traffic, columns instead use the traffic one-to-one assignment.
inline SupervisionTarget project_o2m(const TopoMatrix& g,
                                     const std::vector<std::vector<int>>& row_sets,
                                     const std::vector<int>* col_sigma, int n_pred_rows,
                                     int n_pred_cols) {
    if (int(row_sets.size()) != g.rows)
        throw UsageError("project_o2m: set count does not match topology matrix rows");
    std::vector<uint8_t> seen(n_pred_rows, 0);
    const size_t k = row_sets.empty() ? 0 : row_sets[0].size();
    for (const auto& s : row_sets) {
        if (s.size() != k) throw UsageError("project_o2m: sets must all have size K");
        for (int r : s) {
            if (r < 0 || r >= n_pred_rows)
                throw UsageError("project_o2m: index " + std::to_string(r) + " out of range");
            if (seen[r]++) throw UsageError("project_o2m: overlapping positive sets");
        }
    }
    const bool lt = col_sigma != nullptr;
    if (lt) {
        if (int(col_sigma->size()) != g.cols)
            throw UsageError("project_o2m: column assignment does not match topology matrix");
        detail::check_indices(*col_sigma, n_pred_cols, "project_o2m cols");
    }
    SupervisionTarget t = SupervisionTarget::empty(n_pred_rows, n_pred_cols);
    for (int p = 0; p < g.rows; ++p) {
        for (int q = 0; q < g.cols; ++q) {
            for (int r : row_sets[p]) {
                if (lt) {
                    int s = (*col_sigma)[q];
                    t.z[size_t(r) * n_pred_cols + s] = g.at(p, q);
                    t.valid[size_t(r) * n_pred_cols + s] = 1;
                } else {
                    for (int s : row_sets[q]) {
                        t.z[size_t(r) * n_pred_cols + s] = g.at(p, q);
                        t.valid[size_t(r) * n_pred_cols + s] = 1;
                    }
                }
            }
        }
    }
    return t;
}

inline int count_valid(const SupervisionTarget& t) {
    int n = 0;
    for (uint8_t v : t.valid) n += v != 0;
    return n;
}

}  // namespace lanetopo
