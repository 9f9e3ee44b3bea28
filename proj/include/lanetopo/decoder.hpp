#pragma once

// Lane decoder in four modes: standard (SA -> CA -> FFN), reordered
// (parallel CA -> fuse -> SA -> FFN) with per-block intermediate taps,
// naive one-to-many (standard order, extra supervision downstream), and
// grouped queries with block-diagonal self-attention. Plus the lane,
// traffic and pairwise topology prediction heads.

#include <string>
#include <vector>

#include "lanetopo/nn.hpp"
#include "lanetopo/scene.hpp"

namespace lanetopo {

enum class DecoderMode { standard, reordered, naive_o2m, group_o2m };

inline std::string to_string(DecoderMode m) {
    switch (m) {
        case DecoderMode::standard: return "standard";
        case DecoderMode::reordered: return "reordered";
        case DecoderMode::naive_o2m: return "naive_o2m";
        case DecoderMode::group_o2m: return "group_o2m";
    }
    return "?";
}

inline DecoderMode decoder_mode_from_string(const std::string& s) {
    if (s == "standard") return DecoderMode::standard;
    if (s == "reordered") return DecoderMode::reordered;
    if (s == "naive_o2m") return DecoderMode::naive_o2m;
    if (s == "group_o2m") return DecoderMode::group_o2m;
    throw ConfigError("unknown decoder mode: " + s);
}

struct DecoderConfig {
    int layers = 3;
    int lane_queries = 60;
    int traffic_queries = 20;
    int channels = 64;
    int heads = 4;
    int parallel_blocks = 4;  // M, reordered mode only
    int groups = 3;           // G, group mode only
    DecoderMode mode = DecoderMode::reordered;
    int n_points = 11;
    int traffic_layers = 2;

    void validate() const {
        if (layers < 1) throw ConfigError("decoder: layers must be >= 1");
        if (parallel_blocks < 1) throw ConfigError("decoder: parallel blocks must be >= 1");
        if (channels % heads != 0)
            throw ConfigError("decoder: channels " + std::to_string(channels) +
                              " not divisible by heads " + std::to_string(heads));
        if (mode == DecoderMode::group_o2m &&
            (groups < 1 || lane_queries % groups != 0))
            throw ConfigError("decoder: groups must divide lane query count");
    }

    int group_count() const { return mode == DecoderMode::group_o2m ? groups : 1; }
    int group_size() const { return lane_queries / group_count(); }
};

// Predicted lane points are emitted in window-scale units and mapped to
// meters by this factor.
constexpr double kPointScale = 25.0;

template <typename T>
struct PredictionSet {
    Tensor<T> lane_logits;  // [n x 1] single-foreground logits
    Tensor<T> lane_points;  // [n x n_points*3], meters
    Tensor<T> topo_ll;      // [n x n] logits
    Tensor<T> topo_lt;      // [n x n_traffic_queries] logits (cols may be 0)
};

template <typename T>
struct TrafficPredictions {
    Tensor<T> logits;  // [n x classes]
    Tensor<T> boxes;   // [n x 4] (x_min,y_min,x_max,y_max), each side in (0,1)
};

template <typename T>
struct DecoderOutput {
    std::vector<Tensor<T>> layer_queries;  // per-layer outputs Q^i
    std::vector<Tensor<T>> taps;           // reordered mode: N*M entries, layer-major
    Tensor<T> traffic_queries;             // refined traffic queries ([0 x C] if no traffic)
};

template <typename T>
struct ModelOutput {
    DecoderOutput<T> dec;
    TrafficPredictions<T> traffic;
    // layer_preds[i][g]: heads applied to layer i's queries for group g
    // (single group outside group mode).
    std::vector<std::vector<PredictionSet<T>>> layer_preds;
    // reordered mode, training only: shared heads applied to every tap.
    std::vector<PredictionSet<T>> tap_preds;
};

namespace detail {

template <typename T>
Tensor<T> bev_tokens(const BevFeature& bev, ParamStore<T>& ps, int channels) {
    const int n = bev.spec.cells(), cin = bev.spec.channels;
    std::vector<T> vals(bev.grid.begin(), bev.grid.end());
    Tensor<T> x({n, cin}, std::move(vals));
    auto tok = linear(x, ps, "bev_stem", cin, channels);
    auto pos = ps.get_or_create("bev_pos", {n, channels}, Init::normal_002);
    return add(tok, pos);
}

template <typename T>
Tensor<T> standard_layer(const Tensor<T>& q, const Tensor<T>& kv, ParamStore<T>& ps,
                         const std::string& prefix, const DecoderConfig& cfg,
                         const std::vector<uint8_t>* sa_mask) {
    auto q1 = layer_norm_mod(add(attention(q, q, q, cfg.heads, ps, prefix + ".sa", sa_mask), q),
                             ps, prefix + ".sa_ln", cfg.channels);
    auto q2 = layer_norm_mod(
        add(attention(q1, kv, kv, cfg.heads, ps, prefix + ".ca"), q1), ps, prefix + ".ca_ln",
        cfg.channels);
    return layer_norm_mod(add(ffn(q2, ps, prefix + ".ffn", cfg.channels), q2), ps,
                          prefix + ".ffn_ln", cfg.channels);
}

// CA -> fuse -> SA -> FFN. Each of the M cross-attention blocks has
// independent parameters and emits its pre-suppression queries as a tap.
// The fusion linear exists for every M; at M=1 it starts as identity.
template <typename T>
Tensor<T> reordered_layer(const Tensor<T>& q, const Tensor<T>& kv, ParamStore<T>& ps,
                          const std::string& prefix, const DecoderConfig& cfg, int blocks,
                          std::vector<Tensor<T>>* taps) {
    std::vector<Tensor<T>> branch;
    branch.reserve(blocks);
    for (int m = 0; m < blocks; ++m) {
        auto prefix_m = prefix + ".ca" + std::to_string(m);
        auto t = layer_norm_mod(
            add(attention(q, kv, kv, cfg.heads, ps, prefix_m), q), ps, prefix_m + "_ln",
            cfg.channels);
        if (taps) taps->push_back(t);
        branch.push_back(std::move(t));
    }
    auto cat = blocks == 1 ? branch[0] : concat_cols(branch);
    auto fused = linear(cat, ps, prefix + ".fuse", blocks * cfg.channels, cfg.channels,
                        blocks == 1 ? Init::identity : Init::fan_in_uniform);
    auto s = layer_norm_mod(
        add(attention(fused, fused, fused, cfg.heads, ps, prefix + ".sa"), fused), ps,
        prefix + ".sa_ln", cfg.channels);
    return layer_norm_mod(add(ffn(s, ps, prefix + ".ffn", cfg.channels), s), ps,
                          prefix + ".ffn_ln", cfg.channels);
}

inline std::vector<uint8_t> group_sa_mask(int n, int groups) {
    const int b = n / groups;
    std::vector<uint8_t> mask(size_t(n) * n, 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) mask[size_t(i) * n + j] = (i / b) == (j / b);
    return mask;
}

}  // namespace detail

// Pairwise topology head: one logit per ordered (row, col) query pair from a
// two-layer MLP over the pair's concatenated features. Permuting the input
// rows of either argument permutes the corresponding logit axis identically.
template <typename T>
Tensor<T> topo_head(const Tensor<T>& q_rows, const Tensor<T>& q_cols, ParamStore<T>& ps,
                    const std::string& prefix) {
    if (q_rows.cols() != q_cols.cols())
        throw ShapeError("topo_head: channel mismatch " + shape_str(q_rows.shape()) + " vs " +
                         shape_str(q_cols.shape()));
    const int c = q_rows.cols(), h = c;
    auto a = linear(q_rows, ps, prefix + ".row", c, h);
    auto b = linear(q_cols, ps, prefix + ".col", c, h);
    auto b1 = ps.get_or_create(prefix + ".b1", {h}, Init::zeros);
    auto w2 = ps.get_or_create(prefix + ".w2", {h}, Init::fan_in_uniform);
    auto b2 = ps.get_or_create(prefix + ".b2", {1}, Init::zeros);
    return pair_mlp_logits(a, b, b1, w2, b2);
}

template <typename T>
PredictionSet<T> apply_lane_heads(const Tensor<T>& queries, const Tensor<T>& traffic_queries,
                                  ParamStore<T>& ps, const DecoderConfig& cfg,
                                  const std::string& head_prefix) {
    const int c = cfg.channels;
    PredictionSet<T> out;
    auto hc = gelu(linear(queries, ps, head_prefix + ".cls.fc1", c, c));
    out.lane_logits = linear(hc, ps, head_prefix + ".cls.fc2", c, 1);
    auto hr = gelu(linear(queries, ps, head_prefix + ".reg.fc1", c, c));
    out.lane_points = scale(linear(hr, ps, head_prefix + ".reg.fc2", c, cfg.n_points * 3),
                            T(kPointScale));
    out.topo_ll = topo_head(queries, queries, ps, head_prefix + ".topo_ll");
    out.topo_lt = topo_head(queries, traffic_queries, ps, head_prefix + ".topo_lt");
    return out;
}

template <typename T>
TrafficPredictions<T> apply_traffic_heads(const Tensor<T>& queries, ParamStore<T>& ps,
                                          const DecoderConfig& cfg) {
    const int c = cfg.channels;
    TrafficPredictions<T> out;
    auto hc = gelu(linear(queries, ps, "heads.traffic_cls.fc1", c, c));
    out.logits = linear(hc, ps, "heads.traffic_cls.fc2", c, kTrafficClasses);
    auto hb = gelu(linear(queries, ps, "heads.traffic_box.fc1", c, c));
    auto cwh = sigmoid(linear(hb, ps, "heads.traffic_box.fc2", c, 4));
    auto cx = slice_cols(cwh, 0, 1);
    auto cy = slice_cols(cwh, 1, 1);
    auto hw = scale(slice_cols(cwh, 2, 1), T(0.5));
    auto hh = scale(slice_cols(cwh, 3, 1), T(0.5));
    out.boxes = concat_cols<T>({sub(cx, hw), sub(cy, hh), add(cx, hw), add(cy, hh)});
    return out;
}

inline std::string group_head_prefix(int g) {
    return g == 0 ? std::string("heads") : "heads.g" + std::to_string(g);
}

// Runs the configured decoder over the scene's synthetic features and
// applies the prediction heads. With include_aux set (training), deep
// supervision heads run on every layer output and, in reordered mode, the
// shared heads additionally run on every tap.
template <typename T>
ModelOutput<T> forward(const DecoderConfig& cfg, const BevFeature& bev, const SceneGraph& scene,
                       ParamStore<T>& ps, bool include_aux) {
    cfg.validate();
    ModelOutput<T> out;
    auto kv = detail::bev_tokens(bev, ps, cfg.channels);

    // Traffic path: a short standard decoder over the traffic feature stem,
    // one-to-one assignment only.
    auto tfeat = encode_traffic(scene, ps, cfg.channels);
    if (scene.n_traffic() > 0) {
        auto tq = ps.get_or_create("traffic_query_embed", {cfg.traffic_queries, cfg.channels},
                                   Init::normal_002);
        Tensor<T> q = tq;
        for (int i = 0; i < cfg.traffic_layers; ++i)
            q = detail::standard_layer(q, tfeat, ps, "tdec.layer" + std::to_string(i), cfg,
                                       nullptr);
        out.dec.traffic_queries = q;
        out.traffic = apply_traffic_heads(q, ps, cfg);
    } else {
        out.dec.traffic_queries = Tensor<T>({0, cfg.channels}, {});
        out.traffic.logits = Tensor<T>({0, kTrafficClasses}, {});
        out.traffic.boxes = Tensor<T>({0, 4}, {});
    }

    // Lane path.
    auto lq = ps.get_or_create("lane_query_embed", {cfg.lane_queries, cfg.channels},
                               Init::normal_002);
    Tensor<T> q = lq;
    std::vector<uint8_t> sa_mask;
    const std::vector<uint8_t>* maskp = nullptr;
    if (cfg.mode == DecoderMode::group_o2m && cfg.groups > 1) {
        sa_mask = detail::group_sa_mask(cfg.lane_queries, cfg.groups);
        maskp = &sa_mask;
    }
    for (int i = 0; i < cfg.layers; ++i) {
        auto prefix = "dec.layer" + std::to_string(i);
        if (cfg.mode == DecoderMode::reordered) {
            q = detail::reordered_layer(q, kv, ps, prefix, cfg, cfg.parallel_blocks,
                                        include_aux ? &out.dec.taps : nullptr);
        } else {
            q = detail::standard_layer(q, kv, ps, prefix, cfg, maskp);
        }
        out.dec.layer_queries.push_back(q);
    }

    // Heads: per layer (deep supervision) or final only; per group in group
    // mode. The auxiliary tap heads share parameters with the main heads.
    const int g_count = cfg.group_count();
    const int g_size = cfg.group_size();
    const int first_layer = include_aux ? 0 : cfg.layers - 1;
    for (int i = first_layer; i < cfg.layers; ++i) {
        std::vector<PredictionSet<T>> per_group;
        for (int g = 0; g < g_count; ++g) {
            auto part = g_count == 1 ? out.dec.layer_queries[i]
                                     : slice_rows(out.dec.layer_queries[i], g * g_size, g_size);
            per_group.push_back(apply_lane_heads(part, out.dec.traffic_queries, ps, cfg,
                                                 group_head_prefix(g)));
        }
        out.layer_preds.push_back(std::move(per_group));
    }
    if (include_aux) {
        for (const auto& tap : out.dec.taps)
            out.tap_preds.push_back(
                apply_lane_heads(tap, out.dec.traffic_queries, ps, cfg, group_head_prefix(0)));
    }
    return out;
}

// ---- conversions from prediction tensors to value types ----

template <typename T>
std::vector<Polyline3D> lane_points_to_polylines(const Tensor<T>& points, int n_points) {
    std::vector<Polyline3D> out(points.rows());
    for (int r = 0; r < points.rows(); ++r) {
        out[r].points.resize(n_points);
        for (int p = 0; p < n_points; ++p)
            for (int d = 0; d < 3; ++d)
                out[r].points[p][d] = double(points.at(r, p * 3 + d));
    }
    return out;
}

template <typename T>
std::vector<double> lane_logit_values(const Tensor<T>& logits) {
    std::vector<double> out(logits.numel());
    for (size_t i = 0; i < logits.numel(); ++i) out[i] = double(logits.values()[i]);
    return out;
}

template <typename T>
std::vector<BBox2D> boxes_to_bboxes(const Tensor<T>& boxes) {
    std::vector<BBox2D> out(boxes.rows());
    for (int r = 0; r < boxes.rows(); ++r)
        out[r] = {double(boxes.at(r, 0)), double(boxes.at(r, 1)), double(boxes.at(r, 2)),
                  double(boxes.at(r, 3))};
    return out;
}

template <typename T>
std::vector<std::vector<double>> logit_rows(const Tensor<T>& logits) {
    std::vector<std::vector<double>> out(logits.rows());
    for (int r = 0; r < logits.rows(); ++r) {
        out[r].resize(logits.cols());
        for (int c = 0; c < logits.cols(); ++c) out[r][c] = double(logits.at(r, c));
    }
    return out;
}

}  // namespace lanetopo
