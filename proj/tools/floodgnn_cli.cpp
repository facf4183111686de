#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "floodgnn/common.hpp"
#include "floodgnn/pipeline.hpp"

using namespace floodgnn;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kNumerical = 2;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    for (char c : s) {
        if (c == ',') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else if (c != ' ') {
            item += c;
        }
    }
    if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> parse_thresholds(const std::string& s) {
    std::vector<double> out;
    for (const auto& t : split_list(s)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != t.size() || used == 0) throw InvalidInput("threshold '" + t + "' is not a number");
        out.push_back(v);
    }
    return out;
}

void print_paths(const std::vector<std::string>& paths) {
    for (const auto& p : paths) std::cout << p << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flood forecasting surrogate pipeline: synthetic events, graphs, training and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    std::uint64_t seed = 0;
    int jobs = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Run seed (meshes, floods, split, training)");
    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", out, "Output directory");
    app.add_option("--jobs", jobs, "Parallel events in simulate, evaluate and rollout")->check(CLI::PositiveNumber);
    app.add_option("--set", sets, "Configuration override key=value (repeatable)");
    bool quiet = false;
    app.add_flag("--quiet,-q", quiet, "No progress lines on stderr");

    auto* synth = app.add_subcommand("synth", "Mesh family and hydrograph catalogue");
    auto* simulate = app.add_subcommand("simulate", "Reference simulations on the fine mesh");
    std::string selector = "all";
    bool resume = false;
    simulate->add_option("--events", selector, "Selector such as family=1,peak=1000 or event=3");
    simulate->add_flag("--resume", resume, "Keep outputs whose input hash matches");
    auto* project = app.add_subcommand("project", "Project fine simulations onto the training mesh");
    auto* multimesh = app.add_subcommand("multimesh", "Standard and multimesh graphs of the training mesh");
    std::string experiments;
    auto* train = app.add_subcommand("train", "Train experiments");
    train->add_option("--experiment", experiments, "Comma-separated experiment names (default: configured)");
    auto* rollout = app.add_subcommand("rollout", "Roll trained surrogates out over held-out events");
    rollout->add_option("--experiment", experiments, "Comma-separated experiment names");
    auto* evaluate = app.add_subcommand("evaluate", "L1 and CSI curves of trained experiments");
    std::string thresholds;
    evaluate->add_option("--experiment", experiments, "Comma-separated experiment names");
    evaluate->add_option("--thresholds", thresholds, "Comma-separated depth thresholds in metres");
    auto* stats = app.add_subcommand("stats", "Graph statistics");
    bool graph_stats = false;
    stats->add_flag("--graph", graph_stats, "Nodes, edges, mean edge length and hop radii per graph");
    auto* render = app.add_subcommand("render", "Inundation and depth pixmaps of held-out events");
    render->add_option("--experiment", experiments, "Comma-separated experiment names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        std::vector<std::string> overrides = sets;
        if (*seed_opt) overrides.push_back("seed=" + std::to_string(seed));
        if (!out.empty()) overrides.push_back("out=" + nlohmann::json(out).dump());
        if (jobs > 0) overrides.push_back("jobs=" + std::to_string(jobs));
        const std::string text = config_path.empty() ? std::string() : read_file(config_path);
        Pipeline p(parse_pipeline_config(text, overrides), quiet ? nullptr : &std::cerr);

        const auto names = split_list(experiments);
        if (synth->parsed()) {
            print_paths(p.synth());
        } else if (simulate->parsed()) {
            print_paths(p.simulate(selector, resume));
        } else if (project->parsed()) {
            print_paths(p.project());
        } else if (multimesh->parsed()) {
            print_paths(p.multimesh());
        } else if (train->parsed()) {
            print_paths(p.train(names));
        } else if (rollout->parsed()) {
            print_paths(p.rollout(names));
        } else if (evaluate->parsed()) {
            print_paths(p.evaluate(names, parse_thresholds(thresholds)));
        } else if (stats->parsed()) {
            (void)graph_stats;  // graph statistics are the only report
            std::cout << p.stats_graph();
        } else if (render->parsed()) {
            print_paths(p.render(names));
        }
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    }
    return kOk;
}
