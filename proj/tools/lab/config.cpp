#include "lab/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "sslgmm/errors.hpp"
#include "sslgmm/state_evolution.hpp"

namespace sslgmm::lab {

namespace {

constexpr std::pair<Experiment, std::string_view> experiment_names[] = {
    {Experiment::AmpVsSe, "amp-vs-se"},           {Experiment::GdVsAmp, "gd-vs-amp"},
    {Experiment::LambdaChi, "lambda-chi"},         {Experiment::PhaseDiagram, "phase-diagram"},
    {Experiment::MseHeatmap, "mse-heatmap"},       {Experiment::OptimalLambda, "optimal-lambda"},
    {Experiment::GeCurve, "ge-curve"},             {Experiment::Dataset, "dataset"},
};

const std::set<std::string> top_level_keys = {
    "experiment", "description", "model",     "grids",   "seeds",        "output_dir",
    "quadrature_nodes", "eps_amp", "eps_se",  "chi",     "branches",     "metrics",
    "amp",        "gd",          "bootstrap", "gd_trajectory", "reveal_hidden", "panels",
};

const std::set<std::string> model_keys = {"rho", "lambda0", "lambda", "sigma2", "snr",
                                          "alpha_l", "alpha_u", "n_dim", "mode"};

std::vector<std::string> required_grids(Experiment e) {
    switch (e) {
        case Experiment::LambdaChi:
        case Experiment::PhaseDiagram: return {"chi", "alpha_u"};
        case Experiment::MseHeatmap: return {"snr", "alpha_u"};
        case Experiment::GdVsAmp: return {"n"};
        case Experiment::GeCurve: return {"snr"};
        default: return {};
    }
}

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw InvalidArgument("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get_or(const YAML::Node& node, const char* key, T fallback) {
    const auto child = node[key];
    if (!child) return fallback;
    try {
        return child.as<T>();
    } catch (const YAML::Exception&) {
        throw InvalidArgument(std::string("bad value for '") + key + "'");
    }
}

std::vector<double> parse_grid(const std::string& name, const YAML::Node& node) {
    std::vector<double> out;
    if (node.IsSequence()) {
        for (const auto& v : node) out.push_back(v.as<double>());
        return out;
    }
    if (node.IsScalar()) return {node.as<double>()};
    if (!node.IsMap()) throw InvalidArgument("grid '" + name + "' must be a list or a range");
    check_keys(node, {"start", "stop", "num", "spacing"}, "grid '" + name + "'");
    const double start = get_or(node, "start", 0.0);
    const double stop = get_or(node, "stop", 0.0);
    const int num = get_or(node, "num", 0);
    const auto spacing = get_or<std::string>(node, "spacing", "linear");
    if (num < 0) throw InvalidArgument("grid '" + name + "' has negative size");
    if (spacing != "linear" && spacing != "log") {
        throw InvalidArgument("grid '" + name + "' spacing must be linear or log");
    }
    if (spacing == "log" && !(start > 0.0 && stop > 0.0)) {
        throw InvalidArgument("log grid '" + name + "' needs positive ends");
    }
    for (int j = 0; j < num; ++j) {
        const double f = num == 1 ? 0.0 : double(j) / (num - 1);
        out.push_back(spacing == "log" ? std::exp(std::log(start) + f * (std::log(stop) - std::log(start)))
                                       : start + f * (stop - start));
    }
    return out;
}

ModelParams parse_model(const YAML::Node& node, ModelParams p) {
    if (!node) return p;
    if (!node.IsMap()) throw InvalidArgument("model must be a table");
    check_keys(node, model_keys, "model");
    p.rho = get_or(node, "rho", p.rho);
    p.lambda0 = get_or(node, "lambda0", p.lambda0);
    p.lambda = get_or(node, "lambda", p.lambda);
    p.sigma2 = get_or(node, "sigma2", p.sigma2);
    if (node["snr"]) {
        if (node["sigma2"]) throw InvalidArgument("model sets both sigma2 and snr");
        const double snr = node["snr"].as<double>();
        if (!(snr > 0.0)) throw InvalidArgument("snr must be positive");
        p.sigma2 = 1.0 / (p.lambda0 * snr);
    }
    p.alpha_l = get_or(node, "alpha_l", p.alpha_l);
    p.alpha_u = get_or(node, "alpha_u", p.alpha_u);
    p.n_dim = get_or(node, "n_dim", p.n_dim);
    if (node["mode"]) p.mode = parse_estimator_mode(node["mode"].as<std::string>());
    p.validate();
    return p;
}

std::vector<std::string> string_list(const YAML::Node& node, std::vector<std::string> fallback) {
    if (!node) return fallback;
    std::vector<std::string> out;
    if (node.IsScalar()) return {node.as<std::string>()};
    for (const auto& v : node) out.push_back(v.as<std::string>());
    return out;
}

void set_path(YAML::Node node, const std::vector<std::string>& parts, std::size_t i, const YAML::Node& value) {
    if (i + 1 == parts.size()) {
        node[parts[i]] = value;
        return;
    }
    if (!node[parts[i]] || !node[parts[i]].IsMap()) node[parts[i]] = YAML::Node(YAML::NodeType::Map);
    set_path(node[parts[i]], parts, i + 1, value);
}

}  // namespace

std::string_view to_string(Experiment e) {
    for (const auto& [k, name] : experiment_names) {
        if (k == e) return name;
    }
    return "unknown";
}

Experiment parse_experiment(std::string_view text) {
    for (const auto& [k, name] : experiment_names) {
        if (name == text) return k;
    }
    throw InvalidArgument("unknown experiment '" + std::string(text) + "'");
}

const std::vector<double>& ExperimentConfig::grid(const std::string& name) const {
    const auto it = grids.find(name);
    if (it == grids.end()) throw InvalidArgument("grid '" + name + "' is not defined");
    return it->second;
}

YAML::Node load_config_node(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw InvalidArgument("cannot read config " + path.string() + ": " + e.what());
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw InvalidArgument("config root must be a table");
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) throw InvalidArgument("override '" + ov + "' is not key=value");
        std::vector<std::string> parts;
        std::stringstream ss(ov.substr(0, eq));
        for (std::string part; std::getline(ss, part, '.');) {
            if (part.empty()) throw InvalidArgument("override '" + ov + "' has an empty key segment");
            parts.push_back(part);
        }
        YAML::Node value;
        try {
            value = YAML::Load(ov.substr(eq + 1));
        } catch (const YAML::Exception& e) {
            throw InvalidArgument("override '" + ov + "': " + e.what());
        }
        set_path(root, parts, 0, value);
    }
    return root;
}

ExperimentConfig parse_config(const YAML::Node& node) {
    if (!node.IsMap()) throw InvalidArgument("config root must be a table");
    check_keys(node, top_level_keys, "config");
    ExperimentConfig cfg;
    cfg.source = YAML::Clone(node);
    if (!node["experiment"]) throw InvalidArgument("config lacks 'experiment'");
    cfg.experiment = parse_experiment(node["experiment"].as<std::string>());
    cfg.model = parse_model(node["model"], cfg.model);
    if (const auto g = node["grids"]) {
        if (!g.IsMap()) throw InvalidArgument("grids must be a table");
        for (const auto& kv : g) {
            const auto name = kv.first.as<std::string>();
            cfg.grids[name] = parse_grid(name, kv.second);
        }
    }
    for (const auto& name : required_grids(cfg.experiment)) {
        if (!cfg.has_grid(name)) {
            throw InvalidArgument("experiment " + std::string(to_string(cfg.experiment)) + " needs grid '" + name + "'");
        }
    }
    if (const auto s = node["seeds"]) {
        if (s.IsSequence()) {
            for (const auto& v : s) cfg.seeds.push_back(v.as<std::uint64_t>());
        } else if (s.IsMap()) {
            check_keys(s, {"start", "count"}, "seeds");
            const auto start = get_or<std::uint64_t>(s, "start", 1);
            const int count = get_or(s, "count", 0);
            if (count < 0) throw InvalidArgument("seeds.count must be non-negative");
            for (int j = 0; j < count; ++j) cfg.seeds.push_back(start + j);
        } else {
            cfg.seeds.push_back(s.as<std::uint64_t>());
        }
    }
    cfg.output_dir = get_or<std::string>(node, "output_dir", cfg.output_dir.string());
    cfg.quadrature_nodes = get_or(node, "quadrature_nodes", cfg.quadrature_nodes);
    cfg.eps_amp = get_or(node, "eps_amp", cfg.eps_amp);
    cfg.eps_se = get_or(node, "eps_se", cfg.eps_se);
    cfg.chi = get_or(node, "chi", cfg.chi);
    cfg.branches = string_list(node["branches"], cfg.branches);
    for (const auto& b : cfg.branches) parse_se_branch(b);
    cfg.metrics = string_list(node["metrics"], cfg.metrics);
    for (const auto& m : cfg.metrics) {
        if (m != "mse" && m != "ge") throw InvalidArgument("unknown metric '" + m + "'");
    }
    if (const auto a = node["amp"]) {
        check_keys(a, {"iterations", "max_iter", "init", "init_k", "init_v"}, "amp");
        cfg.amp.iterations = get_or(a, "iterations", cfg.amp.iterations);
        cfg.amp.max_iter = get_or(a, "max_iter", cfg.amp.max_iter);
        cfg.amp.init = get_or(a, "init", cfg.amp.init);
        cfg.amp.init_k = get_or(a, "init_k", cfg.amp.init_k);
        cfg.amp.init_v = get_or(a, "init_v", cfg.amp.init_v);
        const std::set<std::string> inits{"automatic", "supervised", "zero", "overlap"};
        if (!inits.count(cfg.amp.init)) throw InvalidArgument("unknown amp.init '" + cfg.amp.init + "'");
        if (cfg.amp.init_v < 0.0) throw InvalidArgument("amp.init_v must be non-negative");
    }
    if (const auto g = node["gd"]) {
        check_keys(g, {"eta", "eps_gd", "max_iter", "lambda", "divergence_window"}, "gd");
        cfg.gd.eta = get_or(g, "eta", cfg.gd.eta);
        cfg.gd.eps_gd = get_or(g, "eps_gd", cfg.gd.eps_gd);
        cfg.gd.max_iter = get_or(g, "max_iter", cfg.gd.max_iter);
        cfg.gd.lambda = get_or(g, "lambda", cfg.gd.lambda);
        cfg.gd.divergence_window = get_or(g, "divergence_window", cfg.gd.divergence_window);
        cfg.gd.validate();
    }
    if (const auto b = node["bootstrap"]) {
        check_keys(b, {"samples", "seed"}, "bootstrap");
        cfg.bootstrap_samples = get_or(b, "samples", cfg.bootstrap_samples);
        cfg.bootstrap_seed = get_or(b, "seed", cfg.bootstrap_seed);
    }
    cfg.gd_trajectory = get_or(node, "gd_trajectory", cfg.gd_trajectory);
    cfg.reveal_hidden = get_or(node, "reveal_hidden", cfg.reveal_hidden);
    if (const auto panels = node["panels"]) {
        if (!panels.IsSequence()) throw InvalidArgument("panels must be a list");
        std::set<std::string> names;
        for (const auto& pn : panels) {
            check_keys(pn, {"name", "model"}, "panel");
            Panel panel;
            if (!pn["name"]) throw InvalidArgument("panel lacks a name");
            panel.name = pn["name"].as<std::string>();
            if (panel.name.empty() || panel.name.find('/') != std::string::npos || panel.name == "." ||
                panel.name == "..") {
                throw InvalidArgument("invalid panel name '" + panel.name + "'");
            }
            if (!names.insert(panel.name).second) throw InvalidArgument("duplicate panel '" + panel.name + "'");
            panel.model_overrides = pn["model"] ? YAML::Clone(pn["model"]) : YAML::Node(YAML::NodeType::Map);
            parse_model(panel.model_overrides, cfg.model);
            cfg.panels.push_back(std::move(panel));
        }
    }
    if (cfg.quadrature_nodes < 3) throw InvalidArgument("quadrature_nodes must be at least 3");
    if (!(cfg.eps_amp > 0.0) || !(cfg.eps_se > 0.0)) throw InvalidArgument("tolerances must be positive");
    if (!(cfg.chi > 0.0)) throw InvalidArgument("chi must be positive");
    return cfg;
}

ExperimentConfig apply_panel(const ExperimentConfig& cfg, const Panel& panel) {
    ExperimentConfig out = cfg;
    out.panels.clear();
    out.model = parse_model(panel.model_overrides, cfg.model);
    out.output_dir = cfg.output_dir / panel.name;
    return out;
}

std::string config_hash(const YAML::Node& node) {
    YAML::Emitter em;
    em << node;
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : std::string_view(em.c_str())) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace sslgmm::lab
