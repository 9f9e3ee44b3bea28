#pragma once

// Procedural ground-truth scenes: lanes, traffic elements and their topology
// matrices, plus the synthetic BEV/traffic feature front-end that stands in
// for the perception stack, and the scene JSON schema (v1).

#include <string>
#include <vector>

#include <json.hpp>

#include "lanetopo/geometry.hpp"
#include "lanetopo/nn.hpp"
#include "lanetopo/supervision.hpp"

namespace lanetopo {

struct TrafficElement {
    BBox2D box;
    int attr = 0;  // attribute class id in [0, 13)
};

constexpr int kTrafficClasses = 13;

struct SceneGraph {
    std::vector<Polyline3D> lanes;
    std::vector<TrafficElement> traffic;
    TopoMatrix g_ll;  // g_ll[p][q] = 1 iff lane p's end connects to lane q's start
    TopoMatrix g_lt;  // g_lt[p][q] = 1 iff traffic element q governs lane p

    int n_lanes() const { return int(lanes.size()); }
    int n_traffic() const { return int(traffic.size()); }

    void validate() const {
        if (g_ll.rows != n_lanes() || g_ll.cols != n_lanes())
            throw GeometryError("scene: g_ll dimensions inconsistent with lane list");
        if (g_lt.rows != n_lanes() || g_lt.cols != n_traffic())
            throw GeometryError("scene: g_lt dimensions inconsistent");
        for (const auto& l : lanes) l.validate();
        for (const auto& t : traffic) {
            t.box.validate();
            if (t.attr < 0 || t.attr >= kTrafficClasses)
                throw GeometryError("scene: traffic attribute out of range");
        }
        for (int p = 0; p < g_ll.rows; ++p) {
            if (g_ll.at(p, p) != 0) throw GeometryError("scene: lane self-connection");
            for (int q = 0; q < g_ll.cols; ++q) {
                if (g_ll.at(p, q) > 1) throw GeometryError("scene: g_ll not binary");
                if (g_ll.at(p, q) == 1 && endpoint_gap(lanes[p], lanes[q]) >= 0.5)
                    throw GeometryError("scene: connected lanes " + std::to_string(p) + "->" +
                                        std::to_string(q) + " violate endpoint gap bound");
            }
        }
    }
};

enum class SceneTemplate { straight, fork, merge, intersection };

inline std::string to_string(SceneTemplate t) {
    switch (t) {
        case SceneTemplate::straight: return "straight";
        case SceneTemplate::fork: return "fork";
        case SceneTemplate::merge: return "merge";
        case SceneTemplate::intersection: return "intersection";
    }
    return "?";
}

inline SceneTemplate scene_template_from_string(const std::string& s) {
    if (s == "straight") return SceneTemplate::straight;
    if (s == "fork") return SceneTemplate::fork;
    if (s == "merge") return SceneTemplate::merge;
    if (s == "intersection") return SceneTemplate::intersection;
    throw ConfigError("unknown scene template: " + s);
}

struct GeneratorConfig {
    SceneTemplate templ = SceneTemplate::fork;
    int min_lanes = 3;
    int max_lanes = 3;
    double noise_sigma = 0.0;  // coordinate noise, meters
    int min_traffic = 1;
    int max_traffic = 2;
    int n_points = 11;

    void validate() const {
        if (min_lanes < 1 || min_lanes > max_lanes)
            throw ConfigError("generator: infeasible lane bounds [" +
                              std::to_string(min_lanes) + "," + std::to_string(max_lanes) + "]");
        if (min_traffic < 0 || min_traffic > max_traffic)
            throw ConfigError("generator: infeasible traffic bounds");
        if (noise_sigma < 0.0) throw ConfigError("generator: negative noise sigma");
        if (n_points < 2) throw ConfigError("generator: need at least 2 points per lane");
    }
};

// Metric BEV window and feature grid. Cell (i, j) covers
// x in [x_min + i*dx, x_min + (i+1)*dx), y likewise; i runs over h cells
// along x, j over w cells along y. Channels: 0 occupancy, 1 heading sin,
// 2 heading cos, 3 lane-start marker, 4 lane-end marker, 5 seeded Gaussian
// noise, 6/7 normalized cell center coordinates.
struct BevSpec {
    int h = 50;
    int w = 25;
    int channels = 8;
    double x_min = -25.0, x_max = 25.0;
    double y_min = -12.5, y_max = 12.5;
    double noise_std = 0.1;

    int cells() const { return h * w; }
    double dx() const { return (x_max - x_min) / h; }
    double dy() const { return (y_max - y_min) / w; }
    double cell_x(int i) const { return x_min + (i + 0.5) * dx(); }
    double cell_y(int j) const { return y_min + (j + 0.5) * dy(); }
};

struct BevFeature {
    BevSpec spec;
    std::vector<double> grid;  // h*w*channels, cell-major then channel

    double at(int i, int j, int c) const {
        return grid[(size_t(i) * spec.w + j) * spec.channels + c];
    }
    double& at(int i, int j, int c) {
        return grid[(size_t(i) * spec.w + j) * spec.channels + c];
    }
};

namespace detail {

inline double quantize_um(double v) { return std::round(v * 1e6) / 1e6; }

inline void quantize(SceneGraph& s) {
    for (auto& l : s.lanes)
        for (auto& p : l.points)
            for (auto& c : p) c = quantize_um(c);
    for (auto& t : s.traffic) {
        t.box.x_min = quantize_um(t.box.x_min);
        t.box.y_min = quantize_um(t.box.y_min);
        t.box.x_max = quantize_um(t.box.x_max);
        t.box.y_max = quantize_um(t.box.y_max);
    }
}

// Quadratic bezier sampled densely, jittered in the interior, then
// resampled to n points. Endpoints are exact.
inline Polyline3D make_lane(const Vec3& a, const Vec3& ctrl, const Vec3& b, int n, Rng& rng,
                            double noise) {
    Polyline3D dense;
    const int m = 24;
    for (int i = 0; i <= m; ++i) {
        double t = double(i) / m;
        double u = 1.0 - t;
        Vec3 p;
        for (int d = 0; d < 3; ++d)
            p[d] = u * u * a[d] + 2.0 * u * t * ctrl[d] + t * t * b[d];
        if (i > 0 && i < m && noise > 0.0) {
            p[0] += rng.normal() * noise * 0.5;
            p[1] += rng.normal() * noise * 0.5;
        }
        dense.points.push_back(p);
    }
    return resample(dense, n);
}

inline Polyline3D straight_lane(const Vec3& a, const Vec3& b, int n, Rng& rng, double noise) {
    Vec3 mid = {(a[0] + b[0]) / 2, (a[1] + b[1]) / 2, (a[2] + b[2]) / 2};
    return make_lane(a, mid, b, n, rng, noise);
}

inline BBox2D traffic_box(double cx, double cy, Rng& rng) {
    double w = 0.04 + 0.05 * rng.uniform();
    double h = 0.04 + 0.05 * rng.uniform();
    cx = std::clamp(cx, w / 2 + 0.01, 1.0 - w / 2 - 0.01);
    cy = std::clamp(cy, h / 2 + 0.01, 1.0 - h / 2 - 0.01);
    BBox2D b;
    b.x_min = cx - w / 2;
    b.x_max = cx + w / 2;
    b.y_min = cy - h / 2;
    b.y_max = cy + h / 2;
    return b;
}

}  // namespace detail

// Deterministic per (config, seed). Connectivity matrices come from the
// construction templates (shared junction nodes), never inferred post hoc.
inline SceneGraph generate(const GeneratorConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(seed ^ 0x5ce9e5u);
    SceneGraph s;
    const int np = cfg.n_points;
    const double ns = cfg.noise_sigma;
    auto jit = [&](double v, double amp) { return v + rng.normal() * std::min(ns, 1.0) * amp; };

    // Junction-lane bookkeeping used when placing governed traffic lights.
    std::vector<std::vector<int>> governed_groups;

    switch (cfg.templ) {
        case SceneTemplate::straight: {
            int lo = std::max(cfg.min_lanes, 1), hi = std::min(cfg.max_lanes, 6);
            if (lo > hi)
                throw ConfigError("generator: straight template supports 1..6 lanes");
            int n = lo + int(rng.below(uint64_t(hi - lo + 1)));
            for (int i = 0; i < n; ++i) {
                double y = (i - (n - 1) / 2.0) * 3.5;
                Vec3 a = {jit(-20.0, 0.5), jit(y, 1.0), 0.0};
                Vec3 b = {jit(20.0, 0.5), jit(y, 1.0), 0.0};
                s.lanes.push_back(detail::straight_lane(a, b, np, rng, ns));
                governed_groups.push_back({i});
            }
            s.g_ll = TopoMatrix::zeros(n, n);
            break;
        }
        case SceneTemplate::fork:
        case SceneTemplate::merge: {
            if (cfg.max_lanes < 3)
                throw ConfigError("generator: fork/merge template needs at least 3 lanes");
            int fmin = std::max(1, (cfg.min_lanes + 2) / 3);
            int fmax = std::min(2, cfg.max_lanes / 3);
            if (fmin > fmax) fmin = fmax = std::max(1, fmax);
            int forks = fmin + int(rng.below(uint64_t(fmax - fmin + 1)));
            s.g_ll = TopoMatrix::zeros(forks * 3, forks * 3);
            for (int f = 0; f < forks; ++f) {
                double yc = forks == 1 ? jit(0.0, 2.0) : (f == 0 ? -5.0 : 5.0) + jit(0.0, 1.0);
                Vec3 junction = {jit(0.0, 2.0), yc, 0.0};
                double spread = 3.0 + 1.5 * rng.uniform();
                int base = f * 3;
                if (cfg.templ == SceneTemplate::fork) {
                    Vec3 a = {jit(-20.0, 0.5), jit(yc, 1.0), 0.0};
                    s.lanes.push_back(detail::straight_lane(a, junction, np, rng, ns));
                    for (int c = 0; c < 2; ++c) {
                        Vec3 b = {jit(20.0, 0.5), yc + (c == 0 ? -spread : spread), 0.0};
                        Vec3 ctrl = {junction[0] + 6.0, junction[1] + (b[1] - junction[1]) * 0.3,
                                     0.0};
                        s.lanes.push_back(detail::make_lane(junction, ctrl, b, np, rng, ns));
                        s.g_ll.at(base, base + 1 + c) = 1;
                    }
                } else {
                    for (int c = 0; c < 2; ++c) {
                        Vec3 a = {jit(-20.0, 0.5), yc + (c == 0 ? -spread : spread), 0.0};
                        Vec3 ctrl = {junction[0] - 6.0, junction[1] + (a[1] - junction[1]) * 0.3,
                                     0.0};
                        s.lanes.push_back(detail::make_lane(a, ctrl, junction, np, rng, ns));
                        s.g_ll.at(base + c, base + 2) = 1;
                    }
                    Vec3 b = {jit(20.0, 0.5), jit(yc, 1.0), 0.0};
                    s.lanes.push_back(detail::straight_lane(junction, b, np, rng, ns));
                }
                governed_groups.push_back({base, base + 1, base + 2});
            }
            break;
        }
        case SceneTemplate::intersection: {
            if (cfg.max_lanes < 12 || cfg.min_lanes > 12)
                throw ConfigError("generator: intersection template produces exactly 12 lanes");
            // Four arms (W, E, S, N), one inbound + one outbound lane each,
            // plus one connector per inbound arm through the junction box.
            double cx = jit(0.0, 1.0), cy = jit(0.0, 1.0);
            const double b = 5.0, off = 1.75;
            const double ax = 20.0, ay = 10.5;
            struct Arm {
                Vec3 in_a, in_b;    // inbound lane: approach -> box edge
                Vec3 out_a, out_b;  // outbound lane: box edge -> away
            };
            std::vector<Arm> arms = {
                // W arm: traffic entering eastwards, leaving westwards
                {{-ax, cy - off, 0}, {cx - b, cy - off, 0}, {cx - b, cy + off, 0}, {-ax, cy + off, 0}},
                // E arm
                {{ax, cy + off, 0}, {cx + b, cy + off, 0}, {cx + b, cy - off, 0}, {ax, cy - off, 0}},
                // S arm
                {{cx + off, -ay, 0}, {cx + off, cy - b, 0}, {cx - off, cy - b, 0}, {cx - off, -ay, 0}},
                // N arm
                {{cx - off, ay, 0}, {cx - off, cy + b, 0}, {cx + off, cy + b, 0}, {cx + off, ay, 0}},
            };
            int n_lanes = 12;
            s.g_ll = TopoMatrix::zeros(n_lanes, n_lanes);
            std::vector<int> in_idx, out_idx;
            for (auto& arm : arms) {
                in_idx.push_back(int(s.lanes.size()));
                s.lanes.push_back(detail::straight_lane(arm.in_a, arm.in_b, np, rng, ns));
                out_idx.push_back(int(s.lanes.size()));
                s.lanes.push_back(detail::straight_lane(arm.out_a, arm.out_b, np, rng, ns));
            }
            // Connector targets: W->E, E->W, S->N, N->S (straight through),
            // occasionally re-routed to a turning arm.
            std::vector<int> target = {1, 0, 3, 2};
            for (int a = 0; a < 4; ++a) {
                int t = target[a];
                if (rng.uniform() < 0.5) t = (a < 2) ? 2 + int(rng.below(2)) : int(rng.below(2));
                if (t == a) t = target[a];
                Vec3 from = s.lanes[in_idx[a]].points.back();
                Vec3 to = s.lanes[out_idx[t]].points.front();
                Vec3 ctrl = {(from[0] + to[0]) / 2 * 0.4 + cx * 0.6,
                             (from[1] + to[1]) / 2 * 0.4 + cy * 0.6, 0.0};
                int ci = int(s.lanes.size());
                s.lanes.push_back(detail::make_lane(from, ctrl, to, np, rng, ns));
                s.g_ll.at(in_idx[a], ci) = 1;
                s.g_ll.at(ci, out_idx[t]) = 1;
                governed_groups.push_back({in_idx[a], ci});
            }
            break;
        }
    }

    // Traffic elements. Each element governs one construction group; its
    // image-plane position correlates with the governed lanes' lateral
    // placement so the correspondence is recoverable from features.
    int tmin = cfg.min_traffic, tmax = cfg.max_traffic;
    int want = tmin + int(rng.below(uint64_t(tmax - tmin + 1)));
    if (cfg.templ == SceneTemplate::intersection) want = std::max(want, 4);
    s.g_lt = TopoMatrix::zeros(s.n_lanes(), want);
    for (int q = 0; q < want; ++q) {
        const auto& group = governed_groups.empty()
                                ? std::vector<int>{}
                                : governed_groups[q % governed_groups.size()];
        double mean_y = 0.0;
        for (int p : group) mean_y += s.lanes[p].points.front()[1];
        if (!group.empty()) mean_y /= double(group.size());
        double img_x = std::clamp(0.5 + mean_y / 25.0, 0.05, 0.95) + 0.05 * rng.normal();
        double img_y = 0.2 + 0.25 * rng.uniform();
        TrafficElement te;
        te.box = detail::traffic_box(img_x, img_y, rng);
        te.attr = int((q + group.size()) % kTrafficClasses);
        s.traffic.push_back(te);
        for (int p : group) s.g_lt.at(p, q) = 1;
    }

    // Keep every lane inside the BEV window with margin; shared junction
    // nodes clamp identically so endpoint adjacency is preserved.
    for (auto& l : s.lanes)
        for (auto& p : l.points) {
            p[0] = std::clamp(p[0], -24.5, 24.5);
            p[1] = std::clamp(p[1], -12.0, 12.0);
        }
    detail::quantize(s);
    s.validate();
    return s;
}

namespace detail {
inline double point_segment_dist2(double px, double py, const Vec3& a, const Vec3& b) {
    double vx = b[0] - a[0], vy = b[1] - a[1];
    double wx = px - a[0], wy = py - a[1];
    double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
    double dx = px - (a[0] + t * vx), dy = py - (a[1] + t * vy);
    return dx * dx + dy * dy;
}
}  // namespace detail

// Synthetic stand-in for the perception stack: rasterizes the scene onto the
// BEV grid. Occupancy covers cells whose center lies within half a cell
// diagonal of a lane; direction channels hold the nearest lane's heading.
inline BevFeature rasterize(const SceneGraph& scene, const BevSpec& spec, uint64_t seed) {
    for (int li = 0; li < scene.n_lanes(); ++li)
        for (const auto& p : scene.lanes[li].points)
            if (p[0] < spec.x_min || p[0] > spec.x_max || p[1] < spec.y_min || p[1] > spec.y_max)
                throw GeometryError("rasterize: lane " + std::to_string(li) +
                                    " outside BEV window");
    BevFeature f;
    f.spec = spec;
    f.grid.assign(size_t(spec.cells()) * spec.channels, 0.0);
    const double half_diag = 0.5 * std::sqrt(spec.dx() * spec.dx() + spec.dy() * spec.dy());
    const double r2 = half_diag * half_diag;
    for (int i = 0; i < spec.h; ++i) {
        for (int j = 0; j < spec.w; ++j) {
            double px = spec.cell_x(i), py = spec.cell_y(j);
            double best = r2;
            double bsin = 0.0, bcos = 0.0;
            bool hit = false;
            for (const auto& lane : scene.lanes) {
                for (size_t si = 0; si + 1 < lane.points.size(); ++si) {
                    double d2 =
                        detail::point_segment_dist2(px, py, lane.points[si], lane.points[si + 1]);
                    if (d2 <= best) {
                        // strictly-closer wins; first (lowest lane index) wins ties
                        if (d2 < best || !hit) {
                            double hx = lane.points[si + 1][0] - lane.points[si][0];
                            double hy = lane.points[si + 1][1] - lane.points[si][1];
                            double n = std::sqrt(hx * hx + hy * hy);
                            if (n > 0) {
                                bsin = hy / n;
                                bcos = hx / n;
                            }
                            best = d2;
                        }
                        hit = true;
                    }
                }
            }
            if (hit) {
                f.at(i, j, 0) = 1.0;
                f.at(i, j, 1) = bsin;
                f.at(i, j, 2) = bcos;
            }
            f.at(i, j, 6) = (px - spec.x_min) / (spec.x_max - spec.x_min);
            f.at(i, j, 7) = (py - spec.y_min) / (spec.y_max - spec.y_min);
        }
    }
    for (const auto& lane : scene.lanes) {
        for (int which = 0; which < 2; ++which) {
            const Vec3& p = which == 0 ? lane.points.front() : lane.points.back();
            for (int i = 0; i < spec.h; ++i)
                for (int j = 0; j < spec.w; ++j) {
                    double ddx = spec.cell_x(i) - p[0], ddy = spec.cell_y(j) - p[1];
                    if (ddx * ddx + ddy * ddy <= r2) f.at(i, j, 3 + which) = 1.0;
                }
        }
    }
    Rng noise(seed ^ 0xbe5u);
    for (int i = 0; i < spec.h; ++i)
        for (int j = 0; j < spec.w; ++j) f.at(i, j, 5) = noise.normal() * spec.noise_std;
    return f;
}

// Per-element embedding of (box coords, one-hot attribute) through a learned
// linear stem; output dimension equals the decoder channel width.
template <typename T>
Tensor<T> encode_traffic(const SceneGraph& scene, ParamStore<T>& ps, int channels) {
    const int nt = scene.n_traffic();
    const int in = 4 + kTrafficClasses;
    std::vector<T> feats(size_t(nt) * in, T(0));
    for (int q = 0; q < nt; ++q) {
        const auto& te = scene.traffic[q];
        T* row = feats.data() + size_t(q) * in;
        row[0] = T(te.box.x_min);
        row[1] = T(te.box.y_min);
        row[2] = T(te.box.x_max);
        row[3] = T(te.box.y_max);
        row[4 + te.attr] = T(1);
    }
    Tensor<T> x({nt, in}, std::move(feats));
    if (nt == 0) return Tensor<T>({0, channels}, {});
    return linear(x, ps, "traffic_stem", in, channels);
}

// ---- Scene JSON schema v1 ----
// {"version":1, "lanes":[[[x,y,z],...]...], "traffic":[{"box":[4],"attr":k}...],
//  "g_ll":[[0/1,...]...], "g_lt":[[0/1,...]...]}
// Coordinates are quantized to 1e-6 by the generator and serialize with at
// most 9 significant digits, so load(save(s)) == s exactly.

inline nlohmann::json save(const SceneGraph& s) {
    nlohmann::json j;
    j["version"] = 1;
    j["lanes"] = nlohmann::json::array();
    for (const auto& l : s.lanes) {
        nlohmann::json jl = nlohmann::json::array();
        for (const auto& p : l.points) jl.push_back({p[0], p[1], p[2]});
        j["lanes"].push_back(std::move(jl));
    }
    j["traffic"] = nlohmann::json::array();
    for (const auto& t : s.traffic)
        j["traffic"].push_back(
            {{"box", {t.box.x_min, t.box.y_min, t.box.x_max, t.box.y_max}}, {"attr", t.attr}});
    auto mat = [](const TopoMatrix& m) {
        nlohmann::json jm = nlohmann::json::array();
        for (int r = 0; r < m.rows; ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < m.cols; ++c) row.push_back(int(m.at(r, c)));
            jm.push_back(std::move(row));
        }
        return jm;
    };
    j["g_ll"] = mat(s.g_ll);
    j["g_lt"] = mat(s.g_lt);
    return j;
}

inline SceneGraph load(const nlohmann::json& j) {
    auto require = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) throw ParseError(std::string("scene: missing $.") + key);
        return j.at(key);
    };
    const auto& ver = require("version");
    if (!ver.is_number_integer() || ver.get<int>() != 1)
        throw VersionError("scene: unsupported schema version " + ver.dump());
    SceneGraph s;
    const auto& lanes = require("lanes");
    if (!lanes.is_array()) throw ParseError("scene: $.lanes must be an array");
    for (size_t li = 0; li < lanes.size(); ++li) {
        Polyline3D pl;
        for (const auto& p : lanes[li]) {
            if (!p.is_array() || p.size() != 3)
                throw ParseError("scene: $.lanes[" + std::to_string(li) +
                                 "] point must be [x,y,z]");
            pl.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
        }
        s.lanes.push_back(std::move(pl));
    }
    for (const auto& t : require("traffic")) {
        if (!t.contains("box") || !t.contains("attr"))
            throw ParseError("scene: $.traffic entry needs box and attr");
        const auto& b = t.at("box");
        if (!b.is_array() || b.size() != 4) throw ParseError("scene: $.traffic box must be [4]");
        TrafficElement te;
        te.box = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        te.attr = t.at("attr").get<int>();
        s.traffic.push_back(te);
    }
    auto mat = [&](const char* key, int rows, int cols) {
        const auto& jm = require(key);
        if (!jm.is_array() || int(jm.size()) != rows)
            throw ParseError(std::string("scene: $.") + key + " must have " +
                             std::to_string(rows) + " rows");
        TopoMatrix m = TopoMatrix::zeros(rows, cols);
        for (int r = 0; r < rows; ++r) {
            if (int(jm[r].size()) != cols)
                throw ParseError(std::string("scene: $.") + key + "[" + std::to_string(r) +
                                 "] must have " + std::to_string(cols) + " entries");
            for (int c = 0; c < cols; ++c) {
                int v = jm[r][c].get<int>();
                if (v != 0 && v != 1)
                    throw ParseError(std::string("scene: $.") + key + " entries must be 0/1");
                m.at(r, c) = uint8_t(v);
            }
        }
        return m;
    };
    s.g_ll = mat("g_ll", int(s.lanes.size()), int(s.lanes.size()));
    s.g_lt = mat("g_lt", int(s.lanes.size()), int(s.traffic.size()));
    s.validate();
    return s;
}

inline bool scenes_equal(const SceneGraph& a, const SceneGraph& b) {
    if (a.lanes.size() != b.lanes.size() || a.traffic.size() != b.traffic.size()) return false;
    for (size_t i = 0; i < a.lanes.size(); ++i)
        if (a.lanes[i].points != b.lanes[i].points) return false;
    for (size_t i = 0; i < a.traffic.size(); ++i) {
        const auto& x = a.traffic[i];
        const auto& y = b.traffic[i];
        if (x.attr != y.attr || x.box.x_min != y.box.x_min || x.box.y_min != y.box.y_min ||
            x.box.x_max != y.box.x_max || x.box.y_max != y.box.y_max)
            return false;
    }
    return a.g_ll.m == b.g_ll.m && a.g_lt.m == b.g_lt.m && a.g_ll.rows == b.g_ll.rows &&
           a.g_lt.cols == b.g_lt.cols;
}

}  // namespace lanetopo
