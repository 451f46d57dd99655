#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "sslgmm/gd.hpp"
#include "sslgmm/params.hpp"

namespace sslgmm::lab {

enum class Experiment {
    AmpVsSe,
    GdVsAmp,
    LambdaChi,
    PhaseDiagram,
    MseHeatmap,
    OptimalLambda,
    GeCurve,
    Dataset,
};

std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view text);

// A sub-run with its own model overrides, written to output_dir/<name>.
struct Panel {
    std::string name;
    YAML::Node model_overrides;
};

struct AmpSettings {
    int iterations = 0;            // > 0: fixed number of steps (trajectory mode)
    int max_iter = 1000;
    std::string init = "automatic";  // automatic | supervised | zero | overlap
    double init_k = 0.1;           // overlap init: w = k w0 + sqrt(v) z
    double init_v = 0.01;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::LambdaChi;
    ModelParams model;
    std::map<std::string, std::vector<double>> grids;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir = "ssl-gmm-lab-out";
    int quadrature_nodes = 201;
    double eps_amp = 1e-8;
    double eps_se = 1e-8;
    double chi = 0.3;
    std::vector<std::string> branches{"informed"};
    std::vector<std::string> metrics{"mse", "ge"};
    AmpSettings amp;
    GdConfig gd;
    int bootstrap_samples = 1000;
    std::uint64_t bootstrap_seed = 1;
    bool gd_trajectory = false;
    bool reveal_hidden = false;
    std::vector<Panel> panels;
    YAML::Node source;  // effective config after overrides, used for hashing

    // Throws InvalidArgument unless grid `name` was declared.
    const std::vector<double>& grid(const std::string& name) const;
    bool has_grid(const std::string& name) const { return grids.count(name) > 0; }
};

// Applies `key.path=value` overrides (value parsed as YAML) on top of the file.
YAML::Node load_config_node(const std::filesystem::path& path, const std::vector<std::string>& overrides);
ExperimentConfig parse_config(const YAML::Node& node);

// Copy of cfg with a panel's model overrides applied and output_dir set to the subdirectory.
ExperimentConfig apply_panel(const ExperimentConfig& cfg, const Panel& panel);

std::string config_hash(const YAML::Node& node);

}  // namespace sslgmm::lab
