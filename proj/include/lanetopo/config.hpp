#pragma once

// Run configuration and its flat key=value file format. Unknown keys are
// hard errors; serialization is lossless (doubles round-trip exactly).

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lanetopo/decoder.hpp"
#include "lanetopo/losses.hpp"
#include "lanetopo/scene.hpp"

namespace lanetopo {

struct RunConfig {
    DecoderConfig decoder;
    int k = 3;  // positives per ground-truth lane in one-to-many assignment
    double lr = 2e-4;
    double weight_decay = 0.01;
    int steps = 2000;
    int batch_size = 4;
    uint64_t seed = 0;

    // "mixed" cycles fork / merge scenes with their natural lane counts.
    std::string scene_template = "mixed";
    GeneratorConfig scene;
    int scene_pool = 10;
    uint64_t scene_seed = 1;

    BevSpec bev;
    LossWeights weights;
    AuxReduce aux_reduce = AuxReduce::sum;

    void validate() const {
        decoder.validate();
        if (k < 1) throw ConfigError("config: k must be >= 1");
        if (steps < 1) throw ConfigError("config: steps must be >= 1");
        if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
        if (scene_pool < 1) throw ConfigError("config: scene_pool must be >= 1");
        if (lr <= 0) throw ConfigError("config: lr must be positive");
        if (scene_template != "mixed") scene_template_from_string(scene_template);
    }
};

namespace detail {
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace detail

inline std::string config_to_text(const RunConfig& c) {
    std::ostringstream os;
    os << "mode=" << to_string(c.decoder.mode) << "\n";
    os << "layers=" << c.decoder.layers << "\n";
    os << "lane_queries=" << c.decoder.lane_queries << "\n";
    os << "traffic_queries=" << c.decoder.traffic_queries << "\n";
    os << "channels=" << c.decoder.channels << "\n";
    os << "heads=" << c.decoder.heads << "\n";
    os << "parallel_blocks=" << c.decoder.parallel_blocks << "\n";
    os << "groups=" << c.decoder.groups << "\n";
    os << "n_points=" << c.decoder.n_points << "\n";
    os << "traffic_layers=" << c.decoder.traffic_layers << "\n";
    os << "k=" << c.k << "\n";
    os << "lr=" << detail::fmt_double(c.lr) << "\n";
    os << "weight_decay=" << detail::fmt_double(c.weight_decay) << "\n";
    os << "steps=" << c.steps << "\n";
    os << "batch_size=" << c.batch_size << "\n";
    os << "seed=" << c.seed << "\n";
    os << "scene_template=" << c.scene_template << "\n";
    os << "scene_min_lanes=" << c.scene.min_lanes << "\n";
    os << "scene_max_lanes=" << c.scene.max_lanes << "\n";
    os << "scene_noise_sigma=" << detail::fmt_double(c.scene.noise_sigma) << "\n";
    os << "scene_min_traffic=" << c.scene.min_traffic << "\n";
    os << "scene_max_traffic=" << c.scene.max_traffic << "\n";
    os << "scene_pool=" << c.scene_pool << "\n";
    os << "scene_seed=" << c.scene_seed << "\n";
    os << "bev_h=" << c.bev.h << "\n";
    os << "bev_w=" << c.bev.w << "\n";
    os << "bev_noise_std=" << detail::fmt_double(c.bev.noise_std) << "\n";
    os << "w_lane=" << detail::fmt_double(c.weights.lane) << "\n";
    os << "w_traffic=" << detail::fmt_double(c.weights.traffic) << "\n";
    os << "w_topo_ll=" << detail::fmt_double(c.weights.topo_ll) << "\n";
    os << "w_topo_lt=" << detail::fmt_double(c.weights.topo_lt) << "\n";
    os << "w_o2m=" << detail::fmt_double(c.weights.o2m) << "\n";
    os << "focal_alpha=" << detail::fmt_double(c.weights.focal_alpha) << "\n";
    os << "focal_gamma=" << detail::fmt_double(c.weights.focal_gamma) << "\n";
    os << "aux_reduce=" << (c.aux_reduce == AuxReduce::sum ? "sum" : "mean") << "\n";
    return os.str();
}

inline RunConfig config_from_text(const std::string& text) {
    RunConfig c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        auto as_int = [&] { return std::stoi(val); };
        auto as_u64 = [&] { return uint64_t(std::stoull(val)); };
        auto as_double = [&] { return std::stod(val); };
        if (key == "mode") c.decoder.mode = decoder_mode_from_string(val);
        else if (key == "layers") c.decoder.layers = as_int();
        else if (key == "lane_queries") c.decoder.lane_queries = as_int();
        else if (key == "traffic_queries") c.decoder.traffic_queries = as_int();
        else if (key == "channels") c.decoder.channels = as_int();
        else if (key == "heads") c.decoder.heads = as_int();
        else if (key == "parallel_blocks") c.decoder.parallel_blocks = as_int();
        else if (key == "groups") c.decoder.groups = as_int();
        else if (key == "n_points") { c.decoder.n_points = as_int(); c.scene.n_points = c.decoder.n_points; }
        else if (key == "traffic_layers") c.decoder.traffic_layers = as_int();
        else if (key == "k") c.k = as_int();
        else if (key == "lr") c.lr = as_double();
        else if (key == "weight_decay") c.weight_decay = as_double();
        else if (key == "steps") c.steps = as_int();
        else if (key == "batch_size") c.batch_size = as_int();
        else if (key == "seed") c.seed = as_u64();
        else if (key == "scene_template") c.scene_template = val;
        else if (key == "scene_min_lanes") c.scene.min_lanes = as_int();
        else if (key == "scene_max_lanes") c.scene.max_lanes = as_int();
        else if (key == "scene_noise_sigma") c.scene.noise_sigma = as_double();
        else if (key == "scene_min_traffic") c.scene.min_traffic = as_int();
        else if (key == "scene_max_traffic") c.scene.max_traffic = as_int();
        else if (key == "scene_pool") c.scene_pool = as_int();
        else if (key == "scene_seed") c.scene_seed = as_u64();
        else if (key == "bev_h") c.bev.h = as_int();
        else if (key == "bev_w") c.bev.w = as_int();
        else if (key == "bev_noise_std") c.bev.noise_std = as_double();
        else if (key == "w_lane") c.weights.lane = as_double();
        else if (key == "w_traffic") c.weights.traffic = as_double();
        else if (key == "w_topo_ll") c.weights.topo_ll = as_double();
        else if (key == "w_topo_lt") c.weights.topo_lt = as_double();
        else if (key == "w_o2m") c.weights.o2m = as_double();
        else if (key == "focal_alpha") c.weights.focal_alpha = as_double();
        else if (key == "focal_gamma") c.weights.focal_gamma = as_double();
        else if (key == "aux_reduce") {
            if (val == "sum") c.aux_reduce = AuxReduce::sum;
            else if (val == "mean") c.aux_reduce = AuxReduce::mean;
            else throw ConfigError("config: aux_reduce must be sum or mean");
        } else {
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" +
                              key + "'");
        }
    }
    c.scene.n_points = c.decoder.n_points;
    return c;
}

inline RunConfig config_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return config_from_text(ss.str());
}

}  // namespace lanetopo
