#pragma once

// Training loop, evaluation and the ablation runner tying the generator,
// decoder, assignment, supervision, losses and metrics together.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "lanetopo/assignment.hpp"
#include "lanetopo/config.hpp"
#include "lanetopo/decoder.hpp"
#include "lanetopo/losses.hpp"
#include "lanetopo/metrics.hpp"
#include "lanetopo/sha256.hpp"
#include "lanetopo/supervision.hpp"

namespace lanetopo {

struct RunRecord {
    std::string config_text;
    std::vector<double> step_total_loss;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    MetricsReport metrics;
    double wall_clock_sec = 0.0;
    std::string checkpoint_path;
    std::string checkpoint_sha256;
    std::string checkpoint_bytes;
    std::string loss_csv;  // full per-step CSV (also written to disk by the CLI)
};

// ---- scene pool ----

// "mixed" alternates fork and merge scenes with their natural lane counts;
// a concrete template uses the configured bounds for every scene.
inline std::vector<SceneGraph> build_scene_pool(const RunConfig& cfg) {
    std::vector<SceneGraph> pool;
    for (int i = 0; i < cfg.scene_pool; ++i) {
        GeneratorConfig g = cfg.scene;
        if (cfg.scene_template == "mixed") {
            g.templ = (i % 2 == 0) ? SceneTemplate::fork : SceneTemplate::merge;
            g.min_lanes = 3;
            g.max_lanes = 6;
        } else {
            g.templ = scene_template_from_string(cfg.scene_template);
        }
        pool.push_back(generate(g, cfg.scene_seed + uint64_t(i)));
    }
    return pool;
}

// ---- checkpoint container ----
// Layout: magic "LTCP", u32 format version, u64 header length, header JSON
// {format_version, config, seed}, u32 parameter count, then per parameter:
// u32 name length, name, u32 ndims, i32 dims..., u64 value count, f32
// values (little endian). Byte-for-byte reproducible for a given run.

struct Checkpoint {
    std::string config_text;
    uint64_t seed = 0;
    std::vector<std::pair<std::string, std::pair<std::vector<int>, std::vector<float>>>> params;
};

namespace detail {
template <typename V>
void put_raw(std::string& out, const V& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(V));
}
template <typename V>
V get_raw(const std::string& in, size_t& off) {
    if (off + sizeof(V) > in.size()) throw ParseError("checkpoint: truncated");
    V v;
    std::memcpy(&v, in.data() + off, sizeof(V));
    off += sizeof(V);
    return v;
}
}  // namespace detail

template <typename T>
std::string serialize_checkpoint(const ParamStore<T>& ps, const std::string& config_text) {
    std::string out = "LTCP";
    detail::put_raw<uint32_t>(out, 1);
    nlohmann::json header = {
        {"format_version", 1}, {"config", config_text}, {"seed", ps.seed()}};
    std::string htext = header.dump();
    detail::put_raw<uint64_t>(out, htext.size());
    out += htext;
    detail::put_raw<uint32_t>(out, uint32_t(ps.entries().size()));
    for (const auto& [name, t] : ps.entries()) {
        detail::put_raw<uint32_t>(out, uint32_t(name.size()));
        out += name;
        detail::put_raw<uint32_t>(out, uint32_t(t.shape().size()));
        for (int d : t.shape()) detail::put_raw<int32_t>(out, d);
        detail::put_raw<uint64_t>(out, t.numel());
        for (auto v : t.values()) detail::put_raw<float>(out, float(v));
    }
    return out;
}

inline Checkpoint parse_checkpoint(const std::string& data) {
    if (data.size() < 8 || data.substr(0, 4) != "LTCP")
        throw ParseError("checkpoint: bad magic");
    size_t off = 4;
    uint32_t ver = detail::get_raw<uint32_t>(data, off);
    if (ver != 1) throw VersionError("checkpoint: unsupported format version " +
                                     std::to_string(ver));
    uint64_t hlen = detail::get_raw<uint64_t>(data, off);
    if (off + hlen > data.size()) throw ParseError("checkpoint: truncated header");
    auto header = nlohmann::json::parse(data.substr(off, hlen));
    off += hlen;
    Checkpoint ck;
    ck.config_text = header.at("config").get<std::string>();
    ck.seed = header.at("seed").get<uint64_t>();
    uint32_t n = detail::get_raw<uint32_t>(data, off);
    for (uint32_t i = 0; i < n; ++i) {
        uint32_t nl = detail::get_raw<uint32_t>(data, off);
        if (off + nl > data.size()) throw ParseError("checkpoint: truncated name");
        std::string name = data.substr(off, nl);
        off += nl;
        uint32_t nd = detail::get_raw<uint32_t>(data, off);
        std::vector<int> shape(nd);
        for (auto& d : shape) d = detail::get_raw<int32_t>(data, off);
        uint64_t count = detail::get_raw<uint64_t>(data, off);
        std::vector<float> vals(count);
        for (auto& v : vals) v = detail::get_raw<float>(data, off);
        ck.params.emplace_back(name, std::make_pair(std::move(shape), std::move(vals)));
    }
    return ck;
}

template <typename T>
void load_into_store(const Checkpoint& ck, ParamStore<T>& ps) {
    for (const auto& [name, sv] : ck.params) {
        auto t = ps.get_or_create(name, sv.first, Init::zeros);
        auto& vals = t.mutable_values();
        for (size_t i = 0; i < vals.size(); ++i) vals[i] = T(sv.second[i]);
    }
}

// ---- per-scene loss assembly ----

namespace detail {

template <typename T>
std::vector<int> lane_assignment_sigma(const PredictionSet<T>& pred, const SceneGraph& gt,
                                       const LossWeights& w) {
    auto cm = lane_cost(lane_logit_values(pred.lane_logits),
                        lane_points_to_polylines(pred.lane_points, gt.lanes[0].size()), gt.lanes,
                        w.lane, w.lane);
    return hungarian(cm).sigma;
}

template <typename T>
std::vector<int> traffic_assignment_sigma(const TrafficPredictions<T>& pred,
                                          const SceneGraph& gt, const LossWeights& w) {
    if (gt.n_traffic() == 0 || pred.logits.rows() == 0) return {};
    std::vector<int> attrs;
    for (const auto& te : gt.traffic) attrs.push_back(te.attr);
    std::vector<BBox2D> gt_boxes;
    for (const auto& te : gt.traffic) gt_boxes.push_back(te.box);
    auto cm = traffic_cost(logit_rows(pred.logits), boxes_to_bboxes(pred.boxes), gt_boxes, attrs,
                           w.traffic, w.traffic, w.traffic);
    return hungarian(cm).sigma;
}

inline TopoMatrix gll_of(const SceneGraph& s) { return s.g_ll; }

}  // namespace detail

template <typename T>
struct SceneLosses {
    Tensor<T> det;       // weighted detection loss, summed over layers/groups
    Tensor<T> topo_o2o;  // weighted one-to-one topology loss
    Tensor<T> topo_o2m;  // un-weighted auxiliary topology loss (weight applied in total)
    int valid_ll_o2m = 0;  // total valid LL supervision entries over all taps
};

// Assembles every loss term for one scene: per-layer (and per-group)
// one-to-one detection + topology supervision, plus the mode's auxiliary
// one-to-many topology supervision.
template <typename T>
SceneLosses<T> scene_losses(const RunConfig& cfg, const ModelOutput<T>& out,
                            const SceneGraph& scene) {
    const LossWeights& w = cfg.weights;
    SceneLosses<T> r;
    r.det = Tensor<T>::zeros({1});
    r.topo_o2o = Tensor<T>::zeros({1});
    r.topo_o2m = Tensor<T>::zeros({1});

    auto sigma_t = detail::traffic_assignment_sigma(out.traffic, scene, w);
    const int n_tq = out.traffic.logits.rows();

    // Lane-side supervision per layer and per group (deep supervision).
    for (size_t li = 0; li < out.layer_preds.size(); ++li) {
        for (size_t g = 0; g < out.layer_preds[li].size(); ++g) {
            const auto& pred = out.layer_preds[li][g];
            auto sigma = detail::lane_assignment_sigma(pred, scene, w);
            const int nq = pred.lane_logits.rows();
            r.det = add(r.det, scale(lane_detection_term(pred, scene, sigma, w), T(w.lane)));
            // one-to-one topology supervision, valid-only regime
            auto t_ll = project_o2o(scene.g_ll, sigma, nq, SupervisionRegime::valid_only);
            SupervisionTarget t_lt = SupervisionTarget::empty(nq, n_tq);
            if (!sigma_t.empty())
                t_lt = project_o2o(scene.g_lt, sigma, sigma_t, nq, n_tq,
                                   SupervisionRegime::valid_only);
            r.topo_o2o = add(r.topo_o2o, topo_loss_o2o(pred.topo_ll, pred.topo_lt, t_ll, t_lt, w));
        }
    }

    // Traffic detection term applies once, on the final traffic predictions.
    if (n_tq > 0 && !sigma_t.empty())
        r.det = add(r.det,
                    scale(traffic_detection_term(out.traffic, scene, sigma_t, w), T(w.traffic)));

    // Auxiliary one-to-many topology supervision.
    const int k = cfg.k;
    if (cfg.decoder.mode == DecoderMode::reordered && !out.tap_preds.empty()) {
        std::vector<SupervisionTarget> tll, tlt;
        for (const auto& tap : out.tap_preds) {
            auto cm = lane_cost(lane_logit_values(tap.lane_logits),
                                lane_points_to_polylines(tap.lane_points, scene.lanes[0].size()),
                                scene.lanes, w.lane, w.lane);
            auto o2m = one_to_many(cm, k);
            const int nq = tap.lane_logits.rows();
            auto t1 = project_o2m(scene.g_ll, o2m.sets, nullptr, nq, nq);
            r.valid_ll_o2m += count_valid(t1);
            tll.push_back(std::move(t1));
            if (!sigma_t.empty())
                tlt.push_back(project_o2m(scene.g_lt, o2m.sets, &sigma_t, nq, n_tq));
            else
                tlt.push_back(SupervisionTarget::empty(nq, n_tq));
        }
        r.topo_o2m = topo_loss_o2m(out.tap_preds, tll, tlt, w, cfg.aux_reduce);
    } else if (cfg.decoder.mode == DecoderMode::naive_o2m) {
        // Standard layer order; the one-to-many supervision applies
        // downstream, to each layer's main topology predictions.
        std::vector<PredictionSet<T>> sets;
        std::vector<SupervisionTarget> tll, tlt;
        for (size_t li = 0; li < out.layer_preds.size(); ++li) {
            const auto& pred = out.layer_preds[li][0];
            auto cm = lane_cost(lane_logit_values(pred.lane_logits),
                                lane_points_to_polylines(pred.lane_points, scene.lanes[0].size()),
                                scene.lanes, w.lane, w.lane);
            auto o2m = one_to_many(cm, k);
            const int nq = pred.lane_logits.rows();
            sets.push_back(pred);
            tll.push_back(project_o2m(scene.g_ll, o2m.sets, nullptr, nq, nq));
            if (!sigma_t.empty())
                tlt.push_back(project_o2m(scene.g_lt, o2m.sets, &sigma_t, nq, n_tq));
            else
                tlt.push_back(SupervisionTarget::empty(nq, n_tq));
        }
        r.topo_o2m = topo_loss_o2m(sets, tll, tlt, w, cfg.aux_reduce);
    }
    return r;
}

// ---- optimizer ----

// Adam with decoupled weight decay, constant learning rate.
template <typename T>
class AdamW {
  public:
    AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(ParamStore<T>& ps) {
        ++t_;
        if (m_.size() < ps.entries().size()) {
            m_.resize(ps.entries().size());
            v_.resize(ps.entries().size());
        }
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (size_t i = 0; i < ps.entries().size(); ++i) {
            auto& tensor = ps.entries_mut()[i].second;
            if (!tensor.has_grad()) continue;
            auto& vals = tensor.mutable_values();
            const auto& grad = tensor.grad();
            auto& m = m_[i];
            auto& v = v_[i];
            if (m.size() != vals.size()) {
                m.assign(vals.size(), 0.0);
                v.assign(vals.size(), 0.0);
            }
            for (size_t e = 0; e < vals.size(); ++e) {
                double g = double(grad[e]);
                m[e] = b1_ * m[e] + (1.0 - b1_) * g;
                v[e] = b2_ * v[e] + (1.0 - b2_) * g * g;
                double mh = m[e] / bc1;
                double vh = v[e] / bc2;
                double upd = mh / (std::sqrt(vh) + eps_) + wd_ * double(vals[e]);
                vals[e] = T(double(vals[e]) - lr_ * upd);
            }
        }
    }

  private:
    double lr_, wd_, b1_, b2_, eps_;
    int t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// ---- evaluation ----

template <typename T>
ScenePredictions to_scene_predictions(const ModelOutput<T>& out, const DecoderConfig& cfg) {
    const auto& final_pred = out.layer_preds.back()[0];
    ScenePredictions sp;
    sp.lanes = lane_points_to_polylines(final_pred.lane_points, cfg.n_points);
    for (double z : lane_logit_values(final_pred.lane_logits))
        sp.lane_conf.push_back(1.0 / (1.0 + std::exp(-z)));
    sp.boxes = boxes_to_bboxes(out.traffic.boxes);
    for (const auto& row : logit_rows(out.traffic.logits)) {
        int best = 0;
        for (size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[best]) best = int(c);
        sp.box_class.push_back(best);
        sp.box_conf.push_back(1.0 / (1.0 + std::exp(-row[best])));
    }
    auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    sp.ll_conf = logit_rows(final_pred.topo_ll);
    for (auto& row : sp.ll_conf)
        for (auto& v : row) v = sig(v);
    sp.lt_conf = logit_rows(final_pred.topo_lt);
    for (auto& row : sp.lt_conf)
        for (auto& v : row) v = sig(v);
    return sp;
}

// Pure inference + metrics; evaluation rasterization uses the scene index
// as the noise seed, so repeated evaluation is identical.
template <typename T>
MetricsReport evaluate_scenes(const RunConfig& cfg, ParamStore<T>& ps,
                              const std::vector<SceneGraph>& scenes) {
    if (scenes.empty()) throw UsageError("evaluate: empty scene list");
    MetricsAccumulator acc;
    for (size_t i = 0; i < scenes.size(); ++i) {
        auto bev = rasterize(scenes[i], cfg.bev, uint64_t(i));
        auto out = forward(cfg.decoder, bev, scenes[i], ps, /*include_aux=*/false);
        acc.add_scene(to_scene_predictions(out, cfg.decoder), scenes[i]);
    }
    return acc.finalize();
}

inline MetricsReport evaluate_checkpoint(const std::string& checkpoint_bytes,
                                         const std::vector<SceneGraph>& scenes) {
    auto ck = parse_checkpoint(checkpoint_bytes);
    RunConfig cfg = config_from_text(ck.config_text);
    cfg.validate();
    ParamStore<float> ps(ck.seed);
    load_into_store(ck, ps);
    return evaluate_scenes(cfg, ps, scenes);
}

// ---- training ----

// Deterministic per config: fixed scene pool, round-robin batches, Adam with
// decoupled weight decay. Aborts with the step index if the loss leaves the
// finite range.
inline RunRecord train(const RunConfig& cfg) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    auto pool = build_scene_pool(cfg);
    std::vector<BevFeature> rasters;
    for (size_t i = 0; i < pool.size(); ++i)
        rasters.push_back(rasterize(pool[i], cfg.bev, cfg.scene_seed + uint64_t(i)));

    ParamStore<float> ps(cfg.seed);
    AdamW<float> opt(cfg.lr, cfg.weight_decay);
    RunRecord rec;
    rec.config_text = config_to_text(cfg);
    std::string csv = "step,det,topo_o2o,topo_o2m,total,valid_ll_o2m\n";

    for (int step = 0; step < cfg.steps; ++step) {
        ps.zero_grad();
        Tensor<float> batch_loss = Tensor<float>::zeros({1});
        double det_log = 0, o2o_log = 0, o2m_log = 0;
        int valid_ll = 0;
        int expected_valid_ll = 0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            size_t idx = (size_t(step) * cfg.batch_size + b) % pool.size();
            auto out = forward(cfg.decoder, rasters[idx], pool[idx], ps, /*include_aux=*/true);
            auto losses = scene_losses(cfg, out, pool[idx]);
            auto scene_total =
                total_loss(losses.det, losses.topo_o2o, losses.topo_o2m, cfg.weights);
            batch_loss = add(batch_loss, scene_total);
            det_log += double(losses.det.value());
            o2o_log += double(losses.topo_o2o.value());
            o2m_log += double(losses.topo_o2m.value());
            valid_ll += losses.valid_ll_o2m;
            if (cfg.decoder.mode == DecoderMode::reordered)
                expected_valid_ll += int(out.dec.taps.size()) *
                                     (cfg.k * pool[idx].n_lanes()) * (cfg.k * pool[idx].n_lanes());
        }
        if (cfg.decoder.mode == DecoderMode::reordered && valid_ll != expected_valid_ll)
            throw NumericError("train: valid LL supervision count " + std::to_string(valid_ll) +
                               " != expected " + std::to_string(expected_valid_ll));
        batch_loss = scale(batch_loss, 1.0f / float(cfg.batch_size));
        double total = double(batch_loss.value());
        if (!std::isfinite(total))
            throw NumericError("train: diverged at step " + std::to_string(step) +
                               " (last finite total " +
                               std::to_string(rec.step_total_loss.empty()
                                                  ? 0.0
                                                  : rec.step_total_loss.back()) +
                               ")");
        batch_loss.backward();
        opt.step(ps);
        rec.step_total_loss.push_back(total);
        char line[200];
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%d\n", step,
                      det_log / cfg.batch_size, o2o_log / cfg.batch_size,
                      o2m_log / cfg.batch_size, total, valid_ll);
        csv += line;
    }
    rec.initial_loss = rec.step_total_loss.front();
    rec.final_loss = rec.step_total_loss.back();
    rec.loss_csv = std::move(csv);
    rec.metrics = evaluate_scenes(cfg, ps, pool);
    std::string ck = serialize_checkpoint(ps, rec.config_text);
    rec.checkpoint_sha256 = Sha256::hash(ck);
    rec.checkpoint_path = "";  // set by callers that persist the bytes
    rec.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.checkpoint_bytes = std::move(ck);
    return rec;
}

// ---- ablation ----

enum class AblationAxis { mode, k, m };

inline AblationAxis ablation_axis_from_string(const std::string& s) {
    if (s == "mode") return AblationAxis::mode;
    if (s == "k") return AblationAxis::k;
    if (s == "m") return AblationAxis::m;
    throw UsageError("unknown ablation axis: " + s + " (expected mode|k|m)");
}

struct AblationRow {
    std::string axis_value;
    uint64_t seed = 0;
    double top_ll = 0, top_lt = 0, det_l = 0, det_t = 0, ols = 0;
};

struct AblationResult {
    std::vector<AblationRow> rows;
    // medians per axis value, in sweep order
    std::vector<std::pair<std::string, SceneScores>> medians;
    std::string csv;
};

// Applies one axis value to a copy of the base config. Mode values follow
// the ablation naming: baseline_o2o, naive_o2m, group_o2m, ratopo.
inline RunConfig apply_axis(const RunConfig& base, AblationAxis axis, const std::string& value) {
    RunConfig cfg = base;
    switch (axis) {
        case AblationAxis::mode: {
            if (value == "baseline_o2o") cfg.decoder.mode = DecoderMode::standard;
            else if (value == "naive_o2m") cfg.decoder.mode = DecoderMode::naive_o2m;
            else if (value == "group_o2m") cfg.decoder.mode = DecoderMode::group_o2m;
            else if (value == "ratopo") cfg.decoder.mode = DecoderMode::reordered;
            else throw UsageError("unknown mode axis value: " + value);
            break;
        }
        case AblationAxis::k:
            cfg.decoder.mode = DecoderMode::reordered;
            cfg.k = std::stoi(value);
            break;
        case AblationAxis::m:
            cfg.decoder.mode = DecoderMode::reordered;
            cfg.decoder.parallel_blocks = std::stoi(value);
            break;
    }
    return cfg;
}

inline std::vector<std::string> axis_values(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::mode: return {"baseline_o2o", "naive_o2m", "group_o2m", "ratopo"};
        case AblationAxis::k: return {"1", "2", "3", "4", "5"};
        case AblationAxis::m: return {"1", "2", "4", "6"};
    }
    return {};
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// One run per cell per seed. run_fn allows callers to intercept runs (the
// acceptance suite caches identical configs across axes).
inline AblationResult ablate(const RunConfig& base, AblationAxis axis,
                             const std::vector<uint64_t>& seeds,
                             const std::function<MetricsReport(const RunConfig&)>& run_fn) {
    AblationResult res;
    res.csv = "axis,value,seed,top_ll,top_lt,det_l,det_t,ols\n";
    const char* axis_name = axis == AblationAxis::mode ? "mode" : (axis == AblationAxis::k ? "k" : "m");
    for (const auto& value : axis_values(axis)) {
        std::vector<double> tll, tlt, dl, dt, o;
        for (uint64_t seed : seeds) {
            RunConfig cfg = apply_axis(base, axis, value);
            cfg.seed = seed;
            MetricsReport m = run_fn(cfg);
            AblationRow row{value, seed, m.top_ll, m.top_lt, m.det_l, m.det_t, m.ols};
            res.rows.push_back(row);
            char line[240];
            std::snprintf(line, sizeof(line), "%s,%s,%llu,%.9g,%.9g,%.9g,%.9g,%.9g\n", axis_name,
                          value.c_str(), (unsigned long long)seed, m.top_ll, m.top_lt, m.det_l,
                          m.det_t, m.ols);
            res.csv += line;
            tll.push_back(m.top_ll);
            tlt.push_back(m.top_lt);
            dl.push_back(m.det_l);
            dt.push_back(m.det_t);
            o.push_back(m.ols);
        }
        SceneScores med;
        med.top_ll = median(tll);
        med.top_lt = median(tlt);
        med.det_l = median(dl);
        med.det_t = median(dt);
        med.ols = median(o);
        res.medians.emplace_back(value, med);
    }
    return res;
}

inline MetricsReport train_and_evaluate(const RunConfig& cfg) {
    return train(cfg).metrics;
}

}  // namespace lanetopo
