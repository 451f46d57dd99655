#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "lab/config.hpp"
#include "lab/experiments.hpp"
#include "sslgmm/errors.hpp"

using namespace sslgmm;
using namespace sslgmm::lab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("sslgmm-lab-test-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

fs::path write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::set<std::string> files_under(const fs::path& root) {
    std::set<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).generic_string());
    }
    return out;
}

std::set<std::string> csv_files(const fs::path& root) {
    std::set<std::string> out;
    for (const auto& f : files_under(root)) {
        if (fs::path(f).extension() == ".csv") out.insert(f);
    }
    return out;
}

ExperimentConfig config_from(const fs::path& file, const std::vector<std::string>& overrides = {}) {
    return parse_config(load_config_node(file, overrides));
}

const char* small_lambda_chi = R"(experiment: lambda-chi
model: {mode: rmle, rho: 0.5, alpha_l: 0.5, lambda0: 1.0, sigma2: 1.0}
grids:
  chi: {start: 0.1, stop: 0.9, num: 5}
  alpha_u: [1.0, 2.0]
panels:
  - {name: a}
  - {name: b, model: {rho: 0.4}}
)";

int run_cli(const std::string& args) {
    const int status = std::system((std::string(SSLGMM_LAB_EXE) + " " + args + " -q > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("lab") {

TEST_CASE("overrides set nested keys and parse values as yaml") {
    TempDir tmp;
    const auto file = write_file(tmp.path / "c.yaml", small_lambda_chi);
    const auto cfg = config_from(file, {"model.alpha_l=0.25", "grids.alpha_u=[3, 4, 5]", "gd.eta=0.5",
                                        "output_dir=" + (tmp.path / "o").string()});
    CHECK(cfg.model.alpha_l == 0.25);
    CHECK(cfg.grid("alpha_u") == std::vector<double>{3, 4, 5});
    CHECK(cfg.gd.eta == 0.5);
    CHECK(cfg.output_dir == tmp.path / "o");
    CHECK(cfg.grid("chi").size() == 5);
    CHECK(cfg.grid("chi").front() == doctest::Approx(0.1));
    CHECK(cfg.grid("chi").back() == doctest::Approx(0.9));
    for (const char* bad : {"noequals", "=3", "model..rho=1", "model.rho=[1"}) {
        CHECK_THROWS_AS(load_config_node(file, {bad}), InvalidArgument);
    }
}

TEST_CASE("grid forms") {
    TempDir tmp;
    const auto file = write_file(tmp.path / "c.yaml", small_lambda_chi);
    const auto log = config_from(file, {"grids.alpha_u={start: 0.1, stop: 10, num: 3, spacing: log}"});
    REQUIRE(log.grid("alpha_u").size() == 3);
    CHECK(log.grid("alpha_u")[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(config_from(file, {"grids.alpha_u=2.5"}).grid("alpha_u") == std::vector<double>{2.5});
    CHECK(config_from(file, {"grids.alpha_u={start: 1, stop: 2, num: 1}"}).grid("alpha_u") ==
          std::vector<double>{1.0});
    CHECK(config_from(file, {"grids.alpha_u=[]"}).grid("alpha_u").empty());
    CHECK_THROWS_AS(config_from(file, {"grids.alpha_u={start: 0, stop: 1, num: 3, spacing: log}"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"grids.alpha_u={start: 0, stop: 1, num: 3, spacing: cubic}"}),
                    InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"grids.alpha_u={start: 0, stop: 1, num: -1}"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"grids.alpha_u={start: 0, stop: 1, count: 3}"}), InvalidArgument);
}

TEST_CASE("invalid configs are rejected") {
    TempDir tmp;
    const auto file = write_file(tmp.path / "c.yaml", small_lambda_chi);
    CHECK_THROWS_AS(config_from(file, {"experiment=fig99"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"colour=blue"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"model.beta=2"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"model.snr=2"}), InvalidArgument);  // sigma2 already set
    CHECK_THROWS_AS(config_from(file, {"model.rho=1.5"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"model.mode=map"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"quadrature_nodes=2"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"eps_se=0"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"metrics=[mse, auc]"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"amp.init=random"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"panels=[{name: a}, {name: a}]"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"panels=[{name: ../x}]"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"seeds={start: 1, count: -2}"}), InvalidArgument);
    CHECK_THROWS_AS(config_from(file, {"experiment=mse-heatmap"}), InvalidArgument);  // needs grid snr

    const auto empty = write_file(tmp.path / "empty.yaml", "");
    CHECK_THROWS_AS(config_from(empty), InvalidArgument);  // no experiment
    const auto broken = write_file(tmp.path / "broken.yaml", "model: [1,\n");
    CHECK_THROWS_AS(config_from(broken), InvalidArgument);
    CHECK_THROWS_AS(load_config_node(tmp.path / "missing.yaml", {}), InvalidArgument);
    CHECK_THROWS_AS(parse_experiment("amp"), InvalidArgument);
}

TEST_CASE("snr sets sigma2 through lambda0") {
    TempDir tmp;
    const auto file = write_file(tmp.path / "c.yaml", "experiment: ge-curve\nmodel: {lambda0: 2, snr: 0.25}\n"
                                                      "grids: {snr: [1]}\n");
    CHECK(config_from(file).model.sigma2 == doctest::Approx(2.0));
}

TEST_CASE("every preset parses and writes below out/") {
    int count = 0;
    for (const auto& e : fs::directory_iterator(SSLGMM_PRESET_DIR)) {
        if (e.path().extension() != ".yaml") continue;
        ++count;
        CAPTURE(e.path().filename().string());
        ExperimentConfig cfg;
        REQUIRE_NOTHROW(cfg = config_from(e.path()));
        CHECK(cfg.output_dir.generic_string().rfind("out/", 0) == 0);
        for (const auto& panel : cfg.panels) CHECK_NOTHROW(apply_panel(cfg, panel));
    }
    CHECK(count >= 14);
}

TEST_CASE("empty grid gives an empty complete manifest") {
    TempDir tmp;
    const auto file = write_file(tmp.path / "c.yaml", small_lambda_chi);
    const auto cfg = config_from(file, {"grids.alpha_u=[]", "panels=[]", "output_dir=" + (tmp.path / "o").string()});
    const auto m = run_experiment(cfg);
    CHECK(m.tasks.empty());
    CHECK(m.status == "complete");
    CHECK(m.failed_tasks() == 0);
    CHECK(csv_files(tmp.path / "o").empty());
    CHECK(files_under(tmp.path / "o") == std::set<std::string>{"manifest.json", "summary.json"});

    CHECK(run_cli("lambda-chi --config " + file.string() + " --set grids.alpha_u=[] --set output_dir=" +
                  (tmp.path / "cli").string()) == 0);
    CHECK(read_manifest(tmp.path / "cli" / manifest_name).tasks.empty());
}

TEST_CASE("manifest lists exactly the files in the output directory") {
    TempDir tmp;
    const auto file = write_file(tmp.path / "c.yaml", small_lambda_chi);
    const auto cfg = config_from(file, {"output_dir=" + (tmp.path / "o").string()});
    const auto m = run_experiment(cfg);
    CHECK(m.status == "complete");
    CHECK(m.tasks.size() == 4);
    const std::set<std::string> listed(m.outputs.begin(), m.outputs.end());
    CHECK(listed.size() == m.outputs.size());
    CHECK(files_under(tmp.path / "o") == listed);
    CHECK(csv_files(tmp.path / "o").size() == 4);
    for (const auto& f : csv_files(tmp.path / "o")) {
        const auto text = slurp(tmp.path / "o" / f);
        CHECK(text.rfind("# ssl-gmm-lab v", 0) == 0);
        CHECK(text.substr(0, text.find('\n')).find(" schema=") != std::string::npos);
    }
    const auto back = read_manifest(tmp.path / "o" / manifest_name);
    CHECK(back.outputs == m.outputs);
    CHECK(back.config_hash == m.config_hash);
    CHECK(back.config_hash == run_hash(cfg));

    // A changed config replaces the previous outputs rather than leaving them unlisted.
    const auto narrower = config_from(file, {"output_dir=" + (tmp.path / "o").string(), "grids.alpha_u=[3.0]"});
    const auto m2 = run_experiment(narrower);
    const std::set<std::string> listed2(m2.outputs.begin(), m2.outputs.end());
    CHECK(files_under(tmp.path / "o") == listed2);
    CHECK(csv_files(tmp.path / "o").size() == 2);
}

TEST_CASE("identical config is a no-op unless forced") {
    TempDir tmp;
    const auto file = write_file(tmp.path / "c.yaml", small_lambda_chi);
    const auto cfg = config_from(file, {"panels=[]", "output_dir=" + (tmp.path / "o").string()});
    const auto first = run_experiment(cfg);
    CHECK_FALSE(first.reused);
    const auto manifest = tmp.path / "o" / manifest_name;
    const auto before = slurp(manifest);
    const auto second = run_experiment(cfg);
    CHECK(second.reused);
    CHECK(slurp(manifest) == before);
    RunOptions force;
    force.force = true;
    const auto third = run_experiment(cfg, force);
    CHECK_FALSE(third.reused);
    CHECK(third.config_hash == first.config_hash);

    // A deleted output invalidates the no-op.
    fs::remove(tmp.path / "o" / *csv_files(tmp.path / "o").begin());
    CHECK_FALSE(run_experiment(cfg).reused);
    CHECK(files_under(tmp.path / "o").size() == first.outputs.size());

    const auto cli = "lambda-chi --config " + file.string() + " --set panels=[] --set output_dir=" +
                     (tmp.path / "o").string();
    const auto after_rerun = slurp(manifest);
    CHECK(run_cli(cli) == 0);
    CHECK(slurp(manifest) == after_rerun);
    CHECK(run_cli(cli + " --force") == 0);
}

TEST_CASE("outputs do not depend on the thread count") {
    TempDir tmp;
    const auto file = write_file(tmp.path / "c.yaml", small_lambda_chi);
    const auto amp = write_file(tmp.path / "amp.yaml", R"(experiment: amp-vs-se
model: {mode: rmle, rho: 0.4, alpha_l: 0.5, alpha_u: 2.5, lambda0: 1.0, sigma2: 1.0, n_dim: 200}
seeds: {start: 3, count: 4}
chi: 0.3
amp: {iterations: 5}
)");
    for (const auto& f : {file, amp}) {
        CAPTURE(f.string());
        RunOptions one, two;
        two.threads = 2;
        run_experiment(config_from(f, {"output_dir=" + (tmp.path / "t1").string()}), one);
        run_experiment(config_from(f, {"output_dir=" + (tmp.path / "t2").string()}), two);
        const auto a = csv_files(tmp.path / "t1"), b = csv_files(tmp.path / "t2");
        REQUIRE(!a.empty());
        REQUIRE(a == b);
        for (const auto& name : a) CHECK(slurp(tmp.path / "t1" / name) == slurp(tmp.path / "t2" / name));
        fs::remove_all(tmp.path / "t1");
        fs::remove_all(tmp.path / "t2");
    }
}

TEST_CASE("failed cells are recorded without aborting the sweep") {
    TempDir tmp;
    const auto file = write_file(tmp.path / "c.yaml", small_lambda_chi);
    const auto cfg = config_from(file, {"panels=[]", "grids.alpha_u=[1.0, -1.0, 2.0]",
                                        "output_dir=" + (tmp.path / "o").string()});
    const auto m = run_experiment(cfg);
    CHECK(m.status == "partial");
    REQUIRE(m.tasks.size() == 3);
    CHECK(m.failed_tasks() == 1);
    CHECK(m.tasks[0].ok);
    CHECK_FALSE(m.tasks[1].ok);
    CHECK_FALSE(m.tasks[1].message.empty());
    CHECK(m.tasks[2].ok);
    CHECK(csv_files(tmp.path / "o").size() == 2);
    const std::set<std::string> listed(m.outputs.begin(), m.outputs.end());
    CHECK(files_under(tmp.path / "o") == listed);

    CHECK(run_cli("lambda-chi --config " + file.string() + " --set panels=[] --set grids.alpha_u=[1.0,-1.0] " +
                  "--set output_dir=" + (tmp.path / "cli").string()) == 3);
}

TEST_CASE("command line rejects mismatched experiments and bad overrides") {
    TempDir tmp;
    const auto file = write_file(tmp.path / "c.yaml", small_lambda_chi);
    const auto out = " --set output_dir=" + (tmp.path / "o").string();
    CHECK(run_cli("phase-diagram --config " + file.string() + out) == 2);
    CHECK(run_cli("lambda-chi --config " + file.string() + " --set model.rho=7" + out) == 2);
    CHECK(run_cli("lambda-chi --config " + (tmp.path / "missing.yaml").string() + out) != 0);
    CHECK(run_cli("lambda-chi --config " + file.string() + " --threads 0" + out) != 0);
    CHECK_FALSE(fs::exists(tmp.path / "o"));
}

}  // TEST_SUITE
