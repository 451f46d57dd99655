#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lab/config.hpp"
#include "lab/experiments.hpp"
#include "sslgmm/csv.hpp"
#include "sslgmm/errors.hpp"
#include "sslgmm/potentials.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_usage = 2;
constexpr int exit_partial = 3;

}  // namespace

int main(int argc, char** argv) {
    using namespace sslgmm;

    CLI::App app{"Semi-supervised two-cluster GMM experiments (AMP, state evolution, GD, phase analysis)"};
    app.set_version_flag("--version", std::string(library_version()));
    std::string experiment;
    std::string config_path;
    std::vector<std::string> overrides;
    int threads = 1;
    bool force = false;
    bool reveal_hidden = false;
    bool quiet = false;
    app.add_option("experiment", experiment,
                   "amp-vs-se | gd-vs-amp | lambda-chi | phase-diagram | mse-heatmap | optimal-lambda | ge-curve | "
                   "dump-dataset")
        ->required();
    app.add_option("--config", config_path, "YAML experiment config")->required()->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "Override a config entry, e.g. --set model.alpha_u=3 (repeatable)");
    app.add_option("--threads", threads, "Worker threads for sweep cells")->check(CLI::PositiveNumber);
    app.add_flag("--force", force, "Re-run even when an identical run is already on disk");
    app.add_flag("--reveal-hidden", reveal_hidden, "dump-dataset: also write the hidden unlabeled labels");
    app.add_flag("-q,--quiet", quiet, "Suppress progress messages");
    CLI11_PARSE(app, argc, argv);

    if (experiment == "dump-dataset") experiment = "dataset";

    lab::ExperimentConfig cfg;
    try {
        auto node = lab::load_config_node(config_path, overrides);
        if (node["experiment"]) {
            const auto declared = node["experiment"].as<std::string>();
            if (declared != experiment) {
                std::cerr << "error: config " << config_path << " is for experiment '" << declared << "', not '"
                          << experiment << "'\n";
                return exit_usage;
            }
        } else {
            node["experiment"] = experiment;
        }
        if (reveal_hidden) node["reveal_hidden"] = true;
        cfg = lab::parse_config(node);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }

    set_warning_handler([quiet](std::string_view msg) {
        if (!quiet) std::cerr << "warning: " << msg << '\n';
    });

    try {
        lab::RunOptions opts;
        opts.threads = threads;
        opts.force = force;
        opts.log = quiet ? nullptr : &std::cerr;
        const auto m = lab::run_experiment(cfg, opts);
        if (m.reused) {
            std::cout << "up to date: " << (cfg.output_dir / lab::manifest_name).string()
                      << " (use --force to re-run)\n";
            return exit_ok;
        }
        std::cout << m.experiment << ": " << m.status << ", " << m.outputs.size() << " files in "
                  << cfg.output_dir.string() << ", " << m.failed_tasks() << " of " << m.tasks.size()
                  << " cells failed\n";
        return m.failed_tasks() == 0 ? exit_ok : exit_partial;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_error;
    }
}
