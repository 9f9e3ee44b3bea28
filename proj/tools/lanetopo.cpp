// Command-line entry point: scene generation, training, evaluation, the
// ablation grid, the gradient-check suite and the scalar score helper.
//
// Exit codes: 0 success, 2 usage/config error, 3 numeric/divergence error.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lanetopo/config.hpp"
#include "lanetopo/gradcheck_suite.hpp"
#include "lanetopo/harness.hpp"
#include "lanetopo/metrics.hpp"
#include "lanetopo/svg.hpp"

namespace fs = std::filesystem;
using namespace lanetopo;

namespace {

void write_file(const fs::path& path, const std::string& data) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write " + path.string());
    f.write(data.data(), std::streamsize(data.size()));
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<uint64_t> parse_seeds(const std::string& csv) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
    }
    if (seeds.empty()) throw UsageError("no seeds given");
    return seeds;
}

int cmd_scenegen(const std::string& config, int count, uint64_t seed, const std::string& out) {
    RunConfig cfg = config.empty() ? RunConfig{} : config_from_file(config);
    cfg.validate();
    fs::create_directories(out);
    for (int i = 0; i < count; ++i) {
        GeneratorConfig g = cfg.scene;
        if (cfg.scene_template == "mixed") {
            g.templ = (i % 2 == 0) ? SceneTemplate::fork : SceneTemplate::merge;
            g.min_lanes = 3;
            g.max_lanes = 6;
        } else {
            g.templ = scene_template_from_string(cfg.scene_template);
        }
        auto scene = generate(g, seed + uint64_t(i));
        char name[64];
        std::snprintf(name, sizeof(name), "scene_%04d.json", i);
        write_file(fs::path(out) / name, save(scene).dump(2) + "\n");
    }
    std::cout << "wrote " << count << " scenes to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& config, const std::string& out) {
    RunConfig cfg = config_from_file(config);
    cfg.validate();
    RunRecord rec = train(cfg);
    fs::create_directories(out);
    rec.checkpoint_path = (fs::path(out) / "checkpoint.bin").string();
    write_file(rec.checkpoint_path, rec.checkpoint_bytes);
    write_file(fs::path(out) / "losses.csv", rec.loss_csv);
    nlohmann::json j;
    j["config"] = rec.config_text;
    j["initial_loss"] = rec.initial_loss;
    j["final_loss"] = rec.final_loss;
    j["steps"] = rec.step_total_loss.size();
    j["wall_clock_sec"] = rec.wall_clock_sec;
    j["checkpoint_path"] = rec.checkpoint_path;
    j["checkpoint_sha256"] = rec.checkpoint_sha256;
    j["metrics"] = report_to_json(rec.metrics);
    write_file(fs::path(out) / "run_record.json", j.dump(2) + "\n");
    std::cout << "final loss " << rec.final_loss << " (from " << rec.initial_loss << "), ols "
              << rec.metrics.ols << ", checkpoint " << rec.checkpoint_sha256.substr(0, 12)
              << "\n";
    return 0;
}

std::vector<SceneGraph> load_scene_dir(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<SceneGraph> scenes;
    for (const auto& f : files) scenes.push_back(load(nlohmann::json::parse(read_file(f))));
    return scenes;
}

int cmd_eval(const std::string& checkpoint, const std::string& scenes_dir,
             const std::string& out) {
    auto scenes = load_scene_dir(scenes_dir);
    auto report = evaluate_checkpoint(read_file(checkpoint), scenes);
    write_file(out, report_to_json(report).dump(2) + "\n");
    fs::path csv = fs::path(out);
    csv.replace_extension(".csv");
    write_file(csv, report_to_csv(report));
    std::cout << "det_l " << report.det_l << " det_t " << report.det_t << " top_ll "
              << report.top_ll << " top_lt " << report.top_lt << " ols " << report.ols << "\n";
    return 0;
}

int cmd_ablate(const std::string& config, const std::string& axis_str,
               const std::string& seeds_csv, const std::string& out, bool svg) {
    RunConfig base = config_from_file(config);
    base.validate();
    auto axis = ablation_axis_from_string(axis_str);
    auto seeds = parse_seeds(seeds_csv);
    auto result = ablate(base, axis, seeds, [](const RunConfig& cfg) {
        std::cerr << "  run mode=" << to_string(cfg.decoder.mode) << " k=" << cfg.k
                  << " m=" << cfg.decoder.parallel_blocks << " seed=" << cfg.seed << "\n";
        return train_and_evaluate(cfg);
    });
    fs::create_directories(out);
    write_file(fs::path(out) / ("ablate_" + axis_str + ".csv"), result.csv);
    std::string summary = "value,median_top_ll,median_top_lt,median_det_l,median_det_t,median_ols\n";
    for (const auto& [value, med] : result.medians) {
        char line[200];
        std::snprintf(line, sizeof(line), "%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", value.c_str(),
                      med.top_ll, med.top_lt, med.det_l, med.det_t, med.ols);
        summary += line;
    }
    write_file(fs::path(out) / ("ablate_" + axis_str + "_medians.csv"), summary);
    if (svg) {
        std::vector<std::string> labels;
        SvgSeries ll{"median TOP_ll", "#1f77b4", {}};
        SvgSeries lt{"median TOP_lt", "#d62728", {}};
        for (const auto& [value, med] : result.medians) {
            labels.push_back(value);
            ll.y.push_back(med.top_ll);
            lt.y.push_back(med.top_lt);
        }
        write_file(fs::path(out) / ("ablate_" + axis_str + ".svg"),
                   svg_line_plot("median topology score vs " + axis_str, labels, {ll, lt}));
    }
    std::cout << summary;
    return 0;
}

int cmd_gradcheck(int trials) {
    auto res = run_gradcheck_suite(trials);
    std::cout << "gradcheck: " << res.checks << " checks, max rel err " << res.max_rel_err
              << "\n";
    for (const auto& msg : res.failure_messages) std::cout << "  FAIL " << msg << "\n";
    return res.ok() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lane topology reasoning toolkit"};
    app.require_subcommand(1);

    std::string config, out = "out", checkpoint, scenes_dir, axis, seeds = "0,1,2,3,4";
    int count = 10, trials = 100;
    uint64_t seed = 0;
    bool svg = false;
    double det_l = 0, det_t = 0, top_ll = 0, top_lt = 0;

    auto* sg = app.add_subcommand("scenegen", "generate ground-truth scene JSON files");
    sg->add_option("--config", config, "run config file (defaults apply when omitted)");
    sg->add_option("--count", count, "number of scenes")->required();
    sg->add_option("--seed", seed, "base seed");
    sg->add_option("--out", out, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train one model per the config");
    tr->add_option("--config", config, "run config file")->required();
    tr->add_option("--out", out, "output directory")->required();

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a scene directory");
    ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    ev->add_option("--scenes", scenes_dir, "scene JSON directory")->required();
    ev->add_option("--out", out, "report JSON path")->required();

    auto* ab = app.add_subcommand("ablate", "run one ablation axis over seeds");
    ab->add_option("--config", config, "base run config file")->required();
    ab->add_option("--axis", axis, "mode|k|m")->required();
    ab->add_option("--seeds", seeds, "comma-separated seeds");
    ab->add_option("--out", out, "output directory")->required();
    ab->add_flag("--svg", svg, "also write SVG line plots");

    auto* gc = app.add_subcommand("gradcheck", "run the finite-difference suite");
    gc->add_option("--trials", trials, "seeded trials per operation");

    auto* ol = app.add_subcommand("ols", "combined score from four submetrics");
    ol->add_option("--det-l", det_l)->required();
    ol->add_option("--det-t", det_t)->required();
    ol->add_option("--top-ll", top_ll)->required();
    ol->add_option("--top-lt", top_lt)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sg->parsed()) return cmd_scenegen(config, count, seed, out);
        if (tr->parsed()) return cmd_train(config, out);
        if (ev->parsed()) return cmd_eval(checkpoint, scenes_dir, out);
        if (ab->parsed()) return cmd_ablate(config, axis, seeds, out, svg);
        if (gc->parsed()) return cmd_gradcheck(trials);
        if (ol->parsed()) {
            std::printf("%.6f\n", ols(det_l, det_t, top_ll, top_lt));
            return 0;
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
