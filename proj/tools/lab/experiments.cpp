#include "lab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "sslgmm/amp.hpp"
#include "sslgmm/csv.hpp"
#include "sslgmm/dataset.hpp"
#include "sslgmm/errors.hpp"
#include "sslgmm/gd.hpp"
#include "sslgmm/metrics.hpp"
#include "sslgmm/optimal_lambda.hpp"
#include "sslgmm/parallel.hpp"
#include "sslgmm/phase.hpp"
#include "sslgmm/rng.hpp"
#include "sslgmm/state_evolution.hpp"

namespace sslgmm::lab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Collects every file written during a run and the status of every cell.
class Sink {
public:
    Sink(fs::path root, std::ostream* log) : root_(std::move(root)), log_(log) {}

    void enter(const fs::path& dir, std::string label) {
        dir_ = dir;
        label_ = std::move(label);
        fs::create_directories(dir_);
    }

    std::ofstream open(const std::string& name) {
        const fs::path path = dir_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + path.string());
        outputs.push_back(fs::relative(path, root_).generic_string());
        return out;
    }

    void task(const std::string& name, bool ok, const std::string& message = {}) {
        const std::string full = label_.empty() ? name : label_ + "/" + name;
        tasks.push_back({full, ok, message});
        if (!ok) say("cell " + full + " failed: " + message);
    }

    void say(const std::string& line) const {
        if (log_) *log_ << line << '\n' << std::flush;
    }

    std::vector<std::string> outputs;
    std::vector<TaskStatus> tasks;

private:
    fs::path root_;
    fs::path dir_;
    std::string label_;
    std::ostream* log_;
};

template <class R>
struct Cell {
    R value{};
    bool ok = true;
    std::string error;
};

template <class R, class F>
std::vector<Cell<R>> run_cells(std::size_t n, int threads, F&& f) {
    std::vector<Cell<R>> out(n);
    parallel_for(n, threads, [&](std::size_t i) {
        try {
            out[i].value = f(i);
        } catch (const std::exception& e) {
            out[i].ok = false;
            out[i].error = e.what();
        }
    });
    return out;
}

void finish(std::ofstream& out, const std::string& what) {
    out.close();
    if (!out) throw Error("failed writing " + what);
}

std::string num_tag(double x) { return format_double(x); }

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return NAN;
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

struct MeanSe {
    double mean = NAN;
    double stderr_ = NAN;
};

MeanSe mean_se(const std::vector<double>& x) {
    MeanSe r;
    if (x.empty()) return r;
    double s = 0.0;
    for (double v : x) s += v;
    r.mean = s / double(x.size());
    if (x.size() < 2) return r;
    double ss = 0.0;
    for (double v : x) ss += (v - r.mean) * (v - r.mean);
    r.stderr_ = std::sqrt(ss / double(x.size() - 1) / double(x.size()));
    return r;
}

json jnum(double x) { return std::isfinite(x) ? json(x) : json(format_double(x)); }

SeOptions se_options(const ExperimentConfig& cfg) {
    SeOptions se;
    se.quadrature_nodes = cfg.quadrature_nodes;
    se.eps = cfg.eps_se;
    return se;
}

// ---------------------------------------------------------------- amp-vs-se

struct TrajRow {
    int iter = 0;
    double k = 0.0;
    double v = 0.0;
    double rel = NAN;
};

json amp_vs_se(const ExperimentConfig& cfg, Sink& sink, int threads) {
    const ModelParams& p = cfg.model;
    const double chi = cfg.chi;
    const int steps = cfg.amp.iterations > 0 ? cfg.amp.iterations : 30;
    std::string init = cfg.amp.init;
    if (init == "automatic") init = p.alpha_l > 0.0 ? "supervised" : "overlap";

    OrderParams se0 = make_order_params(chi, 0.0, 0.0, p.lambda0);
    if (init == "supervised") {
        se0 = make_order_params(chi, chi * p.alpha_l / p.sigma2, chi * chi * p.alpha_l / p.sigma2, p.lambda0);
    } else if (init == "overlap") {
        se0 = make_order_params(chi, cfg.amp.init_k, cfg.amp.init_v, p.lambda0);
    }
    const auto se = se_trajectory(p, chi, se0, steps, cfg.quadrature_nodes);
    {
        auto out = sink.open("se_trajectory.csv");
        CsvWriter w(out, "se-trajectory/1", {"iter", "k", "v"});
        for (const auto& s : se) w.cell(s.iter).cell(s.k).cell(s.v).end_row();
        finish(out, "se_trajectory.csv");
    }

    const auto& seeds = cfg.seeds;
    auto cells = run_cells<std::vector<TrajRow>>(seeds.size(), threads, [&](std::size_t i) {
        const Dataset data = generate_dataset(p, seeds[i]);
        AmpOptions o;
        o.eps = 1e-300;
        o.max_iter = steps;
        if (init == "supervised") {
            o.init = AmpInit::supervised();
        } else if (init == "zero") {
            o.init = AmpInit::zero();
        } else {
            CounterRng rng(seeds[i], streams::amp_init, 1);
            std::vector<double> w(data.n_dim);
            const double sd = std::sqrt(cfg.amp.init_v);
            for (int j = 0; j < data.n_dim; ++j) w[j] = cfg.amp.init_k * data.w0[j] + sd * rng.normal();
            o.init = AmpInit::given(std::move(w));
        }
        std::vector<TrajRow> rows;
        o.observer = [&](int it, const std::vector<double>& w_hat, double rel) {
            const auto op = order_params_from_state(w_hat, data.w0, chi, p.lambda0);
            rows.push_back({it, op.k, op.v, rel});
        };
        run_amp(data, p, chi, o);
        if (int(rows.size()) != steps + 1) throw ConvergenceError("AMP stopped early", 0.0);
        return rows;
    });

    std::vector<const std::vector<TrajRow>*> good;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const std::string name = "seed" + std::to_string(seeds[i]);
        sink.task(name, cells[i].ok, cells[i].error);
        if (!cells[i].ok) continue;
        good.push_back(&cells[i].value);
        auto out = sink.open("amp_trajectory_" + name + ".csv");
        CsvWriter w(out, "trajectory/1", {"iter", "k", "v", "rel_change"});
        for (const auto& r : cells[i].value) w.cell(r.iter).cell(r.k).cell(r.v).cell(r.rel).end_row();
        finish(out, name);
    }

    double max_zk = 0.0, max_zv = 0.0;
    if (!good.empty()) {
        auto out = sink.open("amp_vs_se.csv");
        CsvWriter w(out, "amp-vs-se/1",
                    {"iter", "se_k", "se_v", "amp_k_mean", "amp_k_stderr", "amp_v_mean", "amp_v_stderr", "z_k", "z_v"});
        for (int t = 0; t <= steps; ++t) {
            std::vector<double> ks, vs;
            for (const auto* g : good) {
                ks.push_back((*g)[t].k);
                vs.push_back((*g)[t].v);
            }
            const auto mk = mean_se(ks);
            const auto mv = mean_se(vs);
            const double zk = (mk.mean - se[t].k) / mk.stderr_;
            const double zv = (mv.mean - se[t].v) / mv.stderr_;
            if (std::isfinite(zk)) max_zk = std::max(max_zk, std::abs(zk));
            if (std::isfinite(zv)) max_zv = std::max(max_zv, std::abs(zv));
            w.cell(t).cell(se[t].k).cell(se[t].v).cell(mk.mean).cell(mk.stderr_).cell(mv.mean).cell(mv.stderr_);
            w.cell(zk).cell(zv).end_row();
        }
        finish(out, "amp_vs_se.csv");
    }
    json s;
    s["chi"] = chi;
    s["init"] = init;
    s["iterations"] = steps;
    s["seeds"] = seeds.size();
    s["seeds_ok"] = good.size();
    s["se_final"] = {{"k", se.back().k}, {"v", se.back().v}};
    s["max_abs_z_k"] = max_zk;
    s["max_abs_z_v"] = max_zv;
    return s;
}

// ---------------------------------------------------------------- gd-vs-amp

struct GdCombo {
    double eta = 0.0;
    double eps = 0.0;
};

struct GdOutcome {
    bool ok = true;
    std::string error;
    double delta = NAN;
    int iters_gd = 0;
    bool converged = false;
    double k_gd = NAN;
    double v_gd = NAN;
    std::vector<std::array<double, 4>> trajectory;  // iter, k, v, objective
};

struct ReplicateResult {
    int iters_amp = 0;
    double k_amp = NAN;
    double v_amp = NAN;
    std::vector<GdOutcome> gd;
};

json gd_vs_amp(const ExperimentConfig& cfg, Sink& sink, int threads) {
    std::vector<int> ns;
    for (double n : cfg.grid("n")) {
        const long r = std::lround(n);
        if (r < 1 || std::abs(n - double(r)) > 1e-9) throw InvalidArgument("grid n must hold positive integers");
        ns.push_back(int(r));
    }
    const std::vector<double> etas = cfg.has_grid("eta") ? cfg.grid("eta") : std::vector<double>{cfg.gd.eta};
    const std::vector<double> epss = cfg.has_grid("eps_gd") ? cfg.grid("eps_gd") : std::vector<double>{cfg.gd.eps_gd};
    std::vector<GdCombo> combos;
    for (double e : etas) {
        for (double s : epss) combos.push_back({e, s});
    }

    ModelParams p = cfg.model;
    p.lambda = cfg.gd.lambda;
    json s;
    s["lambda"] = p.lambda;
    if (ns.empty() || cfg.seeds.empty() || combos.empty()) return s;
    const double chi = chi_from_lambda(p, p.lambda, SeBranch::Informed, se_options(cfg));
    s["chi"] = chi;
    sink.say("gd-vs-amp: lambda=" + format_double(p.lambda) + " chi=" + format_double(chi));

    const std::size_t n_seeds = cfg.seeds.size();
    auto cells = run_cells<ReplicateResult>(ns.size() * n_seeds, threads, [&](std::size_t c) {
        const int n = ns[c / n_seeds];
        const std::uint64_t seed = cfg.seeds[c % n_seeds];
        const bool record = cfg.gd_trajectory && c % n_seeds == 0;
        ModelParams q = p;
        q.n_dim = n;
        const Dataset data = generate_dataset(q, splitmix64(seed ^ (std::uint64_t(n) << 32)));
        AmpOptions o;
        o.eps = cfg.eps_amp;
        o.max_iter = cfg.amp.max_iter;
        o.init = AmpInit::automatic(seed);
        const auto amp = run_amp(data, q, chi, o);
        if (!amp.converged) throw ConvergenceError("AMP did not converge", amp.rel_change_history.back());
        ReplicateResult r;
        r.iters_amp = amp.iter;
        const auto op_amp = order_params_from_state(amp.w_hat, data.w0, chi, q.lambda0);
        r.k_amp = op_amp.k;
        r.v_amp = op_amp.v;
        for (const auto& combo : combos) {
            GdOutcome g;
            try {
                GdConfig gc = cfg.gd;
                gc.eta = combo.eta;
                gc.eps_gd = combo.eps;
                GdObserver obs;
                if (record) {
                    obs = [&](int it, const std::vector<double>& w, double objective) {
                        const auto op = order_params_from_state(w, data.w0, chi, q.lambda0);
                        g.trajectory.push_back({double(it), op.k, op.v, objective});
                    };
                }
                const auto gd = run_gd(data, gc, q, {}, obs);
                g.iters_gd = gd.iterations;
                g.converged = gd.converged;
                g.delta = delta_gd_amp(gd.w, amp.w_hat);
                const auto op = order_params_from_state(gd.w, data.w0, chi, q.lambda0);
                g.k_gd = op.k;
                g.v_gd = op.v;
            } catch (const std::exception& e) {
                g.ok = false;
                g.error = e.what();
            }
            r.gd.push_back(std::move(g));
        }
        return r;
    });

    auto out = sink.open("replicates.csv");
    CsvWriter w(out, "replicates/1",
                {"N", "seed", "eta", "eps_gd", "delta", "iters_gd", "iters_amp", "gd_converged", "k_gd", "v_gd",
                 "k_amp", "v_amp"});
    std::vector<DeltaSamples> samples(combos.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const int n = ns[c / n_seeds];
        const std::uint64_t seed = cfg.seeds[c % n_seeds];
        const std::string base = "N" + std::to_string(n) + "_seed" + std::to_string(seed);
        if (!cells[c].ok) {
            sink.task(base, false, cells[c].error);
            continue;
        }
        const auto& r = cells[c].value;
        for (std::size_t j = 0; j < combos.size(); ++j) {
            const auto& g = r.gd[j];
            const std::string name = base + "_eta" + num_tag(combos[j].eta) + "_eps" + num_tag(combos[j].eps);
            sink.task(name, g.ok && g.converged, g.ok ? (g.converged ? "" : "GD hit max_iter") : g.error);
            if (!g.ok) continue;
            w.cell(n).cell(static_cast<long long>(seed)).cell(combos[j].eta).cell(combos[j].eps).cell(g.delta);
            w.cell(g.iters_gd).cell(r.iters_amp).cell(g.converged ? 1 : 0).cell(g.k_gd).cell(g.v_gd);
            w.cell(r.k_amp).cell(r.v_amp).end_row();
            if (g.converged) samples[j][n].push_back(g.delta);
            if (!g.trajectory.empty()) {
                auto tout = sink.open("gd_trajectory_N" + std::to_string(n) + "_eta" + num_tag(combos[j].eta) +
                                      "_eps" + num_tag(combos[j].eps) + ".csv");
                CsvWriter tw(tout, "gd-trajectory/1", {"iter", "k", "v", "objective", "k_amp", "v_amp"});
                for (const auto& row : g.trajectory) {
                    tw.cell(int(row[0])).cell(row[1]).cell(row[2]).cell(row[3]).cell(r.k_amp).cell(r.v_amp).end_row();
                }
                finish(tout, "gd trajectory");
            }
        }
    }
    finish(out, "replicates.csv");

    auto mout = sink.open("means.csv");
    CsvWriter mw(mout, "delta-means/1", {"eta", "eps_gd", "N", "count", "mean_delta", "stderr_delta"});
    auto fout = sink.open("fit.csv");
    CsvWriter fw(fout, "power-law-fit/1",
                 {"eta", "eps_gd", "delta0", "a", "d", "residual", "converged", "degenerate", "loglog_slope",
                  "boot_q05", "boot_median", "boot_q95", "boot_failures"});
    std::ofstream bout;
    std::unique_ptr<CsvWriter> bw;
    if (cfg.bootstrap_samples > 0) {
        bout = sink.open("bootstrap.csv");
        bw = std::make_unique<CsvWriter>(bout, "bootstrap-delta0/1",
                                         std::initializer_list<std::string_view>{"eta", "eps_gd", "sample", "delta0"});
    }
    json fits = json::array();
    for (std::size_t j = 0; j < combos.size(); ++j) {
        json f;
        f["eta"] = combos[j].eta;
        f["eps_gd"] = combos[j].eps;
        for (const auto& [n, d] : samples[j]) {
            const auto ms = mean_se(d);
            mw.cell(combos[j].eta).cell(combos[j].eps).cell(n).cell(static_cast<long long>(d.size()));
            mw.cell(ms.mean).cell(ms.stderr_).end_row();
        }
        if (samples[j].size() < 3) {
            f["fit_error"] = "need at least three N values";
            fits.push_back(f);
            continue;
        }
        try {
            // A non-converged point fit still gets a row (NaN parameters, converged = 0) so the
            // bootstrap and slope remain visible.
            ScalingFit fit;
            try {
                fit = fit_power_law(samples[j]);
            } catch (const ConvergenceError& e) {
                fit.delta0 = fit.a = fit.d = NAN;
                fit.residual = e.residual();
                f["fit_error"] = e.what();
            }
            const double slope = log_log_slope(samples[j]);
            BootstrapResult boot;
            if (cfg.bootstrap_samples > 0) {
                boot = bootstrap_delta0(samples[j], cfg.bootstrap_samples,
                                        cfg.bootstrap_seed + 1000003ULL * j);
                for (std::size_t b = 0; b < boot.delta0.size(); ++b) {
                    bw->cell(combos[j].eta).cell(combos[j].eps).cell(int(b)).cell(boot.delta0[b]).end_row();
                }
            }
            const double q05 = quantile(boot.delta0, 0.05);
            const double q50 = quantile(boot.delta0, 0.5);
            const double q95 = quantile(boot.delta0, 0.95);
            fw.cell(combos[j].eta).cell(combos[j].eps).cell(fit.delta0).cell(fit.a).cell(fit.d).cell(fit.residual);
            fw.cell(fit.converged ? 1 : 0).cell(fit.degenerate ? 1 : 0).cell(slope).cell(q05).cell(q50).cell(q95);
            fw.cell(boot.failures).end_row();
            f["delta0"] = jnum(fit.delta0);
            f["a"] = jnum(fit.a);
            f["d"] = jnum(fit.d);
            f["loglog_slope"] = jnum(slope);
            f["degenerate"] = fit.degenerate;
            f["bootstrap"] = {{"q05", jnum(q05)}, {"median", jnum(q50)}, {"q95", jnum(q95)},
                              {"failures", boot.failures}};
        } catch (const std::exception& e) {
            f["fit_error"] = e.what();
        }
        fits.push_back(f);
    }
    finish(mout, "means.csv");
    finish(fout, "fit.csv");
    if (bw) finish(bout, "bootstrap.csv");
    s["fits"] = fits;
    return s;
}

// ---------------------------------------------------------------- lambda-chi

json lambda_chi(const ExperimentConfig& cfg, Sink& sink, int threads) {
    std::vector<double> chis = cfg.grid("chi");
    std::sort(chis.begin(), chis.end());
    chis.erase(std::unique(chis.begin(), chis.end()), chis.end());
    const auto& alphas = cfg.grid("alpha_u");
    json s = json::array();
    if (chis.empty() || alphas.empty()) return s;
    const std::size_t nb = cfg.branches.size();
    auto cells = run_cells<LambdaChiTable>(alphas.size() * nb, threads, [&](std::size_t c) {
        ModelParams p = cfg.model;
        p.alpha_u = alphas[c / nb];
        return build_lambda_chi_table(p, chis, parse_se_branch(cfg.branches[c % nb]), se_options(cfg));
    });
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const std::string name = "au" + num_tag(alphas[c / nb]) + "_" + cfg.branches[c % nb];
        sink.task(name, cells[c].ok, cells[c].error);
        if (!cells[c].ok) continue;
        const auto& t = cells[c].value;
        auto out = sink.open("lambda_chi_" + name + ".csv");
        write_lambda_chi_csv(out, t);
        finish(out, name);
        int singular = 0;
        for (const auto& r : t.rows) singular += r.phase == "singular";
        json e;
        e["alpha_u"] = alphas[c / nb];
        e["branch"] = cfg.branches[c % nb];
        e["monotone"] = t.monotone;
        json tc = json::array();
        for (double x : t.transition_chis) tc.push_back(x);
        e["transition_chis"] = tc;
        e["singular_rows"] = singular;
        s.push_back(e);
    }
    return s;
}

// ---------------------------------------------------------------- phase-diagram

struct CurvePoint {
    double chi = NAN;
    double k = NAN;
    double v = NAN;
    double mse = NAN;
    double at = NAN;
};

// Location of fixed-lambda estimators in the (chi, alpha_u) plane, e.g. the Nishimori line
// (Bayes, lambda = lambda0), with the error and the RSB flag along each curve.
json lambda_curves(const ExperimentConfig& cfg, Sink& sink, int threads) {
    const auto& lambdas = cfg.grid("lambda");
    const auto& alphas = cfg.grid("alpha_u");
    const auto se = se_options(cfg);
    const std::size_t na = alphas.size();
    auto cells = run_cells<CurvePoint>(lambdas.size() * na, threads, [&](std::size_t c) {
        ModelParams p = cfg.model;
        p.lambda = lambdas[c / na];
        p.alpha_u = alphas[c % na];
        CurvePoint pt;
        pt.chi = chi_from_lambda(p, p.lambda, SeBranch::Informed, se);
        const auto fp = se_fixed_point(p, pt.chi, branch_init(SeBranch::Informed, pt.chi, p.lambda0), se);
        if (!fp.converged) throw ConvergenceError("SE did not converge", fp.residual);
        pt.k = fp.op.k;
        pt.v = fp.op.v;
        pt.mse = mse_from_order_params(pt.k, pt.v, p.lambda0);
        pt.at = at_instability(p, pt.chi, fp.op, p.mode, cfg.quadrature_nodes);
        return pt;
    });
    auto out = sink.open("lambda_curves.csv");
    CsvWriter w(out, "lambda-curves/1", {"lambda", "alpha_u", "chi", "k_star", "v_star", "mse", "at_integral", "rsb"});
    json curves = json::array();
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
        json intervals = json::array();
        double start = NAN, last = NAN;
        for (std::size_t ai = 0; ai < na; ++ai) {
            const auto& cell = cells[li * na + ai];
            sink.task("lambda" + num_tag(lambdas[li]) + "_au" + num_tag(alphas[ai]), cell.ok, cell.error);
            const auto& pt = cell.value;
            const bool rsb = cell.ok && pt.at >= 1.0;
            w.cell(lambdas[li]).cell(alphas[ai]).cell(pt.chi).cell(pt.k).cell(pt.v).cell(pt.mse).cell(pt.at);
            w.cell(rsb ? 1 : 0).end_row();
            if (rsb && std::isnan(start)) start = alphas[ai];
            if (rsb) last = alphas[ai];
            if ((!rsb || ai + 1 == na) && !std::isnan(start)) {
                intervals.push_back({start, last});
                start = NAN;
            }
        }
        curves.push_back({{"lambda", lambdas[li]}, {"rsb_alpha_u_intervals", intervals}});
    }
    finish(out, "lambda_curves.csv");
    return curves;
}

json phase_diagram(const ExperimentConfig& cfg, Sink& sink, int threads) {
    const auto& chis = cfg.grid("chi");
    const auto& alphas = cfg.grid("alpha_u");
    json s;
    std::map<std::string, int> counts;
    if (chis.empty() || alphas.empty()) {
        s["counts"] = counts;
        return s;
    }
    ClassifyOptions co;
    co.se = se_options(cfg);
    const std::size_t nc = chis.size();
    auto cells = run_cells<PhaseReport>(alphas.size() * nc, threads, [&](std::size_t c) {
        ModelParams p = cfg.model;
        p.alpha_u = alphas[c / nc];
        return classify_phase(p, chis[c % nc], p.mode, co);
    });
    auto out = sink.open("phase.csv");
    CsvWriter w(out, "phase-diagram/1",
                {"chi", "alpha_u", "phase", "raw_phase", "k_star", "v_star", "at_integral", "k_lin", "v_lin"});
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const double chi = chis[c % nc];
        const double au = alphas[c / nc];
        sink.task("chi" + num_tag(chi) + "_au" + num_tag(au), cells[c].ok, cells[c].error);
        w.cell(chi).cell(au);
        if (!cells[c].ok) {
            w.cell("failed").cell("failed").cell(NAN).cell(NAN).cell(NAN).cell(NAN).cell(NAN).end_row();
            ++counts["failed"];
            continue;
        }
        const auto& r = cells[c].value;
        const std::string ph(to_string(r.phase));
        ++counts[ph];
        w.cell(ph).cell(r.raw_phase).cell(r.k_star).cell(r.v_star).cell(r.stability.at_integral);
        w.cell(r.stability.k_lin).cell(r.stability.v_lin).end_row();
    }
    finish(out, "phase.csv");

    auto bout = sink.open("boundaries.csv");
    CsvWriter bw(bout, "phase-boundaries/1", {"alpha_u", "chi_u_r", "chi_u_d", "chi_undetected", "chi_d_r"});
    auto guarded = [](auto&& f) {
        try {
            return double(f());
        } catch (const Error&) {
            return double(NAN);
        }
    };
    for (double au : alphas) {
        ModelParams p = cfg.model;
        p.alpha_u = au;
        bw.cell(au);
        bw.cell(guarded([&] { return critical_chi_u_r(p); }));
        bw.cell(guarded([&] { return critical_chi_u_d(p, p.mode); }));
        bw.cell(guarded([&] { return chi_undetected_branch(p); }));
        bw.cell(guarded([&] { return detected_random_boundary(p, p.mode, cfg.quadrature_nodes); }));
        bw.end_row();
    }
    finish(bout, "boundaries.csv");
    s["counts"] = counts;
    if (cfg.has_grid("lambda")) s["lambda_curves"] = lambda_curves(cfg, sink, threads);
    return s;
}

// ---------------------------------------------------------------- mse-heatmap

struct HeatCell {
    double sigma2 = 0.0;
    double chi = NAN;
    double k = NAN;
    double v = NAN;
    double mse = NAN;
    double ge = NAN;
    double at = NAN;
};

json mse_heatmap(const ExperimentConfig& cfg, Sink& sink, int threads) {
    const auto& snrs = cfg.grid("snr");
    const auto& alphas = cfg.grid("alpha_u");
    json s;
    s["lambda"] = cfg.model.lambda;
    s["mode"] = std::string(to_string(cfg.model.mode));
    if (snrs.empty() || alphas.empty()) return s;
    const auto se = se_options(cfg);
    const std::size_t na = alphas.size();
    auto cells = run_cells<HeatCell>(snrs.size() * na, threads, [&](std::size_t c) {
        const double snr = snrs[c / na];
        if (!(snr > 0.0)) throw InvalidArgument("SNR must be positive");
        ModelParams p = cfg.model;
        p.alpha_u = alphas[c % na];
        p.sigma2 = 1.0 / (p.lambda0 * snr);
        HeatCell h;
        h.sigma2 = p.sigma2;
        h.chi = chi_from_lambda(p, p.lambda, SeBranch::Informed, se);
        const auto fp = se_fixed_point(p, h.chi, branch_init(SeBranch::Informed, h.chi, p.lambda0), se);
        if (!fp.converged) throw ConvergenceError("SE did not converge", fp.residual);
        h.k = fp.op.k;
        h.v = fp.op.v;
        h.mse = mse_from_order_params(h.k, h.v, p.lambda0);
        h.ge = ge_from_order_params(h.k, h.v, p);
        h.at = at_instability(p, h.chi, fp.op, p.mode, cfg.quadrature_nodes);
        return h;
    });
    auto out = sink.open("heatmap.csv");
    CsvWriter w(out, "mse-heatmap/1",
                {"snr", "alpha_u", "sigma2", "chi", "k_star", "v_star", "mse", "ge", "at_integral", "rsb"});
    int rsb = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const double snr = snrs[c / na];
        const double au = alphas[c % na];
        sink.task("snr" + num_tag(snr) + "_au" + num_tag(au), cells[c].ok, cells[c].error);
        const auto& h = cells[c].value;
        const bool is_rsb = cells[c].ok && h.at >= 1.0;
        rsb += is_rsb;
        w.cell(snr).cell(au).cell(1.0 / (cfg.model.lambda0 * snr)).cell(h.chi).cell(h.k).cell(h.v).cell(h.mse);
        w.cell(h.ge).cell(h.at).cell(is_rsb ? 1 : 0).end_row();
    }
    finish(out, "heatmap.csv");
    auto bout = sink.open("boundary.csv");
    CsvWriter bw(bout, "heatmap-boundary/1", {"snr", "alpha_u_boundary"});
    for (double snr : snrs) {
        ModelParams p = cfg.model;
        p.sigma2 = 1.0 / (p.lambda0 * snr);
        double b = NAN;
        try {
            b = bo_heatmap_boundary(p);
        } catch (const Error&) {
        }
        bw.cell(snr).cell(b).end_row();
    }
    finish(bout, "boundary.csv");
    s["rsb_cells"] = rsb;
    return s;
}

// ---------------------------------------------------------------- optimal-lambda / ge-curve

OptimalLambdaOptions optimal_options(const ExperimentConfig& cfg) {
    OptimalLambdaOptions o;
    o.se.quadrature_nodes = cfg.quadrature_nodes;
    o.se.eps = std::min(cfg.eps_se, o.se.eps);
    return o;
}

json optimal_lambda(const ExperimentConfig& cfg, Sink& sink, int threads) {
    ModelParams p = cfg.model;
    p.mode = EstimatorMode::Rmle;
    const auto opts = optimal_options(cfg);
    json s;
    auto cells = run_cells<OptimalLambdaResult>(cfg.metrics.size(), threads, [&](std::size_t c) {
        return search_optimal_lambda(p, parse_metric(cfg.metrics[c]), opts);
    });
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& m = cfg.metrics[c];
        sink.task(m, cells[c].ok, cells[c].error);
        if (!cells[c].ok) {
            s[m] = {{"error", cells[c].error}};
            continue;
        }
        const auto& r = cells[c].value;
        auto out = sink.open("optimal_lambda_" + m + ".csv");
        CsvWriter w(out, "optimal-lambda-curve/1", {"inv_lambda", "chi", "k_star", "v_star", "mse", "ge"});
        for (const auto& pt : r.curve) w.cell(pt.inv_lambda).cell(pt.chi).cell(pt.k).cell(pt.v).cell(pt.mse).cell(pt.ge).end_row();
        finish(out, m);
        s[m] = {{"lambda_star", jnum(r.lambda_star)},
                {"inv_lambda_star", jnum(r.inv_lambda_star)},
                {"chi_star", jnum(r.chi_star)},
                {"error_at_star", jnum(r.error_at_star)},
                {"bo_error", jnum(r.bo_error)},
                {"relative_gap", jnum((r.error_at_star - r.bo_error) / r.bo_error)},
                {"flat", r.flat},
                {"fallback_used", r.fallback_used}};
    }

    if (cfg.has_grid("inv_lambda")) {
        const auto& xs = cfg.grid("inv_lambda");
        auto curve = run_cells<OptimalLambdaCurvePoint>(xs.size(), threads, [&](std::size_t c) {
            if (!(xs[c] > 0.0)) throw InvalidArgument("1/lambda must be positive");
            OptimalLambdaCurvePoint pt;
            pt.inv_lambda = xs[c];
            pt.chi = chi_from_lambda(p, 1.0 / xs[c], SeBranch::Informed, opts.se);
            const auto fp = se_fixed_point(p, pt.chi, branch_init(SeBranch::Informed, pt.chi, p.lambda0), opts.se);
            if (!fp.converged) throw ConvergenceError("SE did not converge", fp.residual);
            pt.k = fp.op.k;
            pt.v = fp.op.v;
            pt.mse = mse_from_order_params(pt.k, pt.v, p.lambda0);
            pt.ge = ge_from_order_params(pt.k, pt.v, p);
            return pt;
        });
        auto out = sink.open("error_curve.csv");
        CsvWriter w(out, "error-curve/1", {"inv_lambda", "chi", "k_star", "v_star", "mse", "ge"});
        for (std::size_t c = 0; c < xs.size(); ++c) {
            sink.task("inv_lambda" + num_tag(xs[c]), curve[c].ok, curve[c].error);
            const auto& pt = curve[c].value;
            w.cell(xs[c]).cell(curve[c].ok ? pt.chi : NAN).cell(curve[c].ok ? pt.k : NAN);
            w.cell(curve[c].ok ? pt.v : NAN).cell(curve[c].ok ? pt.mse : NAN).cell(curve[c].ok ? pt.ge : NAN).end_row();
        }
        finish(out, "error_curve.csv");
    }
    try {
        const auto bo = bo_reference(p, opts.se);
        s["bo"] = {{"chi", bo.chi}, {"k", bo.k}, {"v", bo.v}, {"mse", bo.mse}, {"ge", bo.ge}};
    } catch (const std::exception& e) {
        s["bo"] = {{"error", e.what()}};
    }
    return s;
}

json ge_curve(const ExperimentConfig& cfg, Sink& sink, int threads) {
    const auto& snrs = cfg.grid("snr");
    if (cfg.has_grid("alpha_u") && cfg.has_grid("rho")) throw InvalidArgument("ge-curve sweeps alpha_u or rho, not both");
    std::string second = "none";
    std::vector<double> values{NAN};
    if (cfg.has_grid("alpha_u")) {
        second = "alpha_u";
        values = cfg.grid("alpha_u");
    } else if (cfg.has_grid("rho")) {
        second = "rho";
        values = cfg.grid("rho");
    }
    const auto opts = optimal_options(cfg);
    const std::size_t nm = cfg.metrics.size(), nv = values.size(), ns = snrs.size();
    json s;
    s["sweep"] = second;
    auto cells = run_cells<GapPoint>(nm * nv * ns, threads, [&](std::size_t c) {
        const auto& m = cfg.metrics[c / (nv * ns)];
        const double val = values[(c / ns) % nv];
        const double snr = snrs[c % ns];
        if (!(snr > 0.0)) throw InvalidArgument("SNR must be positive");
        ModelParams p = cfg.model;
        p.mode = EstimatorMode::Rmle;
        if (second == "alpha_u") p.alpha_u = val;
        if (second == "rho") p.rho = val;
        p.sigma2 = 1.0 / (p.lambda0 * snr);
        const auto r = search_optimal_lambda(p, parse_metric(m), opts);
        GapPoint g;
        g.snr = snr;
        g.alpha_u = p.alpha_u;
        g.rho = p.rho;
        g.rmle_error = r.error_at_star;
        g.bo_error = r.bo_error;
        g.relative_gap = (r.error_at_star - r.bo_error) / r.bo_error;
        g.inv_lambda_star = r.inv_lambda_star;
        g.flat = r.flat;
        g.fallback_used = r.fallback_used;
        return g;
    });
    json groups = json::array();
    if (!cells.empty()) {
        auto out = sink.open("gap_curve.csv");
        CsvWriter w(out, "gap-curve/1",
                    {"metric", "snr", "alpha_u", "rho", "rmle_error", "bo_error", "relative_gap", "inv_lambda_star",
                     "flat", "fallback"});
        for (std::size_t mi = 0; mi < nm; ++mi) {
            for (std::size_t vi = 0; vi < nv; ++vi) {
                double max_gap = -INFINITY, snr_at = NAN;
                int flat = 0, failed = 0;
                for (std::size_t si = 0; si < ns; ++si) {
                    const auto& cell = cells[(mi * nv + vi) * ns + si];
                    std::string name = cfg.metrics[mi] + "_snr" + num_tag(snrs[si]);
                    if (second != "none") name += "_" + second + num_tag(values[vi]);
                    sink.task(name, cell.ok, cell.error);
                    if (!cell.ok) {
                        ++failed;
                        continue;
                    }
                    const auto& g = cell.value;
                    w.cell(cfg.metrics[mi]).cell(g.snr).cell(g.alpha_u).cell(g.rho).cell(g.rmle_error).cell(g.bo_error);
                    w.cell(g.relative_gap).cell(g.inv_lambda_star).cell(g.flat ? 1 : 0).cell(g.fallback_used ? 1 : 0);
                    w.end_row();
                    flat += g.flat;
                    if (g.relative_gap > max_gap) {
                        max_gap = g.relative_gap;
                        snr_at = g.snr;
                    }
                }
                json e;
                e["metric"] = cfg.metrics[mi];
                if (second != "none") e[second] = values[vi];
                e["max_relative_gap"] = jnum(max_gap);
                e["snr_at_max"] = jnum(snr_at);
                e["flat_points"] = flat;
                e["failed_points"] = failed;
                groups.push_back(e);
            }
        }
        finish(out, "gap_curve.csv");
    }
    s["groups"] = groups;
    return s;
}

// ---------------------------------------------------------------- dataset

json dataset(const ExperimentConfig& cfg, Sink& sink, int) {
    const std::vector<std::uint64_t> seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{1} : cfg.seeds;
    json s = json::array();
    for (auto seed : seeds) {
        const auto data = generate_dataset(cfg.model, seed);
        auto out = sink.open("dataset_seed" + std::to_string(seed) + ".csv");
        write_dataset_csv(out, data, cfg.reveal_hidden);
        finish(out, "dataset");
        sink.task("seed" + std::to_string(seed), true);
        s.push_back({{"seed", seed},
                     {"labeled", data.x_labeled.rows()},
                     {"unlabeled", data.x_unlabeled.rows()},
                     {"hidden_labels_written", cfg.reveal_hidden}});
    }
    return s;
}

json dispatch(const ExperimentConfig& cfg, Sink& sink, int threads) {
    switch (cfg.experiment) {
        case Experiment::AmpVsSe: return amp_vs_se(cfg, sink, threads);
        case Experiment::GdVsAmp: return gd_vs_amp(cfg, sink, threads);
        case Experiment::LambdaChi: return lambda_chi(cfg, sink, threads);
        case Experiment::PhaseDiagram: return phase_diagram(cfg, sink, threads);
        case Experiment::MseHeatmap: return mse_heatmap(cfg, sink, threads);
        case Experiment::OptimalLambda: return optimal_lambda(cfg, sink, threads);
        case Experiment::GeCurve: return ge_curve(cfg, sink, threads);
        case Experiment::Dataset: return dataset(cfg, sink, threads);
    }
    throw InvalidArgument("unknown experiment");
}

json model_json(const ModelParams& p) {
    return {{"rho", p.rho},         {"lambda0", p.lambda0}, {"lambda", p.lambda},   {"sigma2", p.sigma2},
            {"alpha_l", p.alpha_l}, {"alpha_u", p.alpha_u}, {"n_dim", p.n_dim},     {"mode", to_string(p.mode)}};
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json manifest_json(const RunManifest& m) {
    json j;
    j["tool"] = "ssl-gmm-lab";
    j["version"] = m.version;
    j["experiment"] = m.experiment;
    j["config_hash"] = m.config_hash;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    j["status"] = m.status;
    j["threads"] = m.threads;
    j["failed_tasks"] = m.failed_tasks();
    json tasks = json::array();
    for (const auto& t : m.tasks) {
        json e{{"name", t.name}, {"status", t.ok ? "ok" : "failed"}};
        if (!t.message.empty()) e["message"] = t.message;
        tasks.push_back(e);
    }
    j["tasks"] = tasks;
    j["outputs"] = m.outputs;
    return j;
}

}  // namespace

int RunManifest::failed_tasks() const {
    return int(std::count_if(tasks.begin(), tasks.end(), [](const auto& t) { return !t.ok; }));
}

std::string run_hash(const ExperimentConfig& cfg) {
    YAML::Node n(YAML::NodeType::Map);
    n["config"] = cfg.source;
    n["version"] = std::string(library_version());
    return config_hash(n);
}

RunManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error("malformed manifest " + path.string() + ": " + e.what());
    }
    RunManifest m;
    m.version = j.value("version", "");
    m.experiment = j.value("experiment", "");
    m.config_hash = j.value("config_hash", "");
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    m.status = j.value("status", "");
    m.threads = j.value("threads", 1);
    for (const auto& t : j.value("tasks", json::array())) {
        m.tasks.push_back({t.value("name", ""), t.value("status", "") == "ok", t.value("message", "")});
    }
    for (const auto& o : j.value("outputs", json::array())) m.outputs.push_back(o.get<std::string>());
    return m;
}

RunManifest run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    const fs::path root = cfg.output_dir;
    const fs::path manifest_path = root / manifest_name;
    const std::string hash = run_hash(cfg);

    if (fs::exists(manifest_path)) {
        RunManifest old;
        bool readable = true;
        try {
            old = read_manifest(manifest_path);
        } catch (const Error&) {
            readable = false;
        }
        if (readable && !options.force && old.config_hash == hash &&
            std::all_of(old.outputs.begin(), old.outputs.end(),
                        [&](const std::string& o) { return fs::exists(root / o); })) {
            old.reused = true;
            return old;
        }
        // Stale outputs of a previous run would otherwise be left unlisted.
        if (readable) {
            for (const auto& o : old.outputs) {
                const fs::path f = root / o;
                if (fs::is_regular_file(f)) fs::remove(f);
            }
        }
    }

    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw Error("cannot create output directory " + root.string() + ": " + ec.message());
    {
        const fs::path probe = root / ".write-test";
        std::ofstream t(probe);
        if (!t) throw Error("output directory " + root.string() + " is not writable");
        t.close();
        fs::remove(probe);
    }

    RunManifest m;
    m.config_hash = hash;
    m.version = std::string(library_version());
    m.experiment = std::string(to_string(cfg.experiment));
    m.started_at = utc_now();
    m.threads = std::max(1, options.threads);

    Sink sink(root, options.log);
    json summary;
    summary["experiment"] = m.experiment;
    summary["version"] = m.version;
    summary["config_hash"] = hash;
    if (cfg.panels.empty()) {
        sink.enter(root, "");
        summary["model"] = model_json(cfg.model);
        summary["results"] = dispatch(cfg, sink, m.threads);
    } else {
        json panels;
        for (const auto& panel : cfg.panels) {
            const auto sub = apply_panel(cfg, panel);
            sink.enter(sub.output_dir, panel.name);
            sink.say(m.experiment + ": panel " + panel.name);
            panels[panel.name] = {{"model", model_json(sub.model)}, {"results", dispatch(sub, sink, m.threads)}};
        }
        summary["panels"] = panels;
    }
    m.tasks = std::move(sink.tasks);
    m.outputs = std::move(sink.outputs);
    m.status = m.failed_tasks() == 0 ? "complete" : "partial";
    summary["status"] = m.status;
    summary["failed_tasks"] = m.failed_tasks();
    {
        std::ofstream out(root / summary_name, std::ios::binary | std::ios::trunc);
        out << summary.dump(2) << '\n';
        if (!out) throw Error("failed writing summary.json");
    }
    m.outputs.push_back(summary_name);
    m.outputs.push_back(manifest_name);
    m.finished_at = utc_now();
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    out << manifest_json(m).dump(2) << '\n';
    if (!out) throw Error("failed writing manifest.json");
    return m;
}

}  // namespace sslgmm::lab
