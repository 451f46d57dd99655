#include "sslgmm/gd.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "sslgmm/errors.hpp"
#include "sslgmm/potentials.hpp"

namespace sslgmm {

namespace {

double norm2(const std::vector<double>& a) {
    return std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
}

struct GdWorkspace {
    std::vector<double> labeled_field;
    double labeled_sq = 0.0;
    std::vector<double> unlabeled_sq;
};

GdWorkspace make_gd_workspace(const Dataset& data) {
    GdWorkspace ws;
    const int n = data.n_dim;
    ws.labeled_field.assign(n, 0.0);
    for (int mu = 0; mu < data.x_labeled.rows(); ++mu) {
        const auto row = data.x_labeled.row(mu);
        const double y = data.y_labeled[mu];
        for (int i = 0; i < n; ++i) ws.labeled_field[i] += y * row[i];
        ws.labeled_sq += std::inner_product(row.begin(), row.end(), row.begin(), 0.0);
    }
    ws.unlabeled_sq.resize(data.x_unlabeled.rows());
    for (int nu = 0; nu < data.x_unlabeled.rows(); ++nu) {
        const auto row = data.x_unlabeled.row(nu);
        ws.unlabeled_sq[nu] = std::inner_product(row.begin(), row.end(), row.begin(), 0.0);
    }
    return ws;
}

ObjectiveGradient evaluate(const std::vector<double>& w, const Dataset& data, const ModelParams& params,
                           double lambda, const GdWorkspace& ws) {
    const int n = data.n_dim;
    if (int(w.size()) != n) throw InvalidArgument("weight vector length does not match the dataset");
    const double s2 = params.sigma2;
    const double c = 1.0 / std::sqrt(double(n));
    const double w_sq = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
    const int m_l = data.x_labeled.rows();
    const int m_u = data.x_unlabeled.rows();

    ObjectiveGradient out;
    const double lw = std::inner_product(ws.labeled_field.begin(), ws.labeled_field.end(), w.begin(), 0.0);
    out.objective = (ws.labeled_sq - 2.0 * c * lw + m_l * c * c * w_sq) / (2.0 * s2) + 0.5 * lambda * w_sq;

    std::vector<double> resp = ws.labeled_field;
    for (int nu = 0; nu < m_u; ++nu) {
        const auto row = data.x_unlabeled.row(nu);
        const double p = c * std::inner_product(row.begin(), row.end(), w.begin(), 0.0) / s2;
        const double base = (ws.unlabeled_sq[nu] + c * c * w_sq) / (2.0 * s2);
        out.objective += base - log_partition(0.0, p, 0.0, params.rho);
        const double f = f_tilde(p, params.rho);
        for (int i = 0; i < n; ++i) resp[i] += f * row[i];
    }

    out.gradient.resize(n);
    const double diag = lambda + (m_l + m_u) * c * c / s2;
    for (int i = 0; i < n; ++i) out.gradient[i] = diag * w[i] - c * resp[i] / s2;
    return out;
}

}  // namespace

void GdConfig::validate() const {
    if (!(eta > 0.0)) throw InvalidArgument("GD learning rate must be positive");
    if (!(eps_gd > 0.0)) throw InvalidArgument("GD threshold must be positive");
    if (max_iter < 0) throw InvalidArgument("GD max_iter must be non-negative");
    if (!std::isfinite(lambda)) throw InvalidArgument("GD lambda must be finite");
}

ObjectiveGradient objective_and_gradient(const std::vector<double>& w, const Dataset& data,
                                         const ModelParams& params) {
    return evaluate(w, data, params, params.lambda, make_gd_workspace(data));
}

GdResult run_gd(const Dataset& data, const GdConfig& cfg, const ModelParams& params,
                const std::vector<double>& init, const GdObserver& observer) {
    cfg.validate();
    const int n = data.n_dim;
    const GdWorkspace ws = make_gd_workspace(data);
    GdResult res;
    res.w = init.empty() ? std::vector<double>(n, 0.0) : init;
    if (int(res.w.size()) != n) throw InvalidArgument("GD initial vector has wrong length");

    double prev_objective = INFINITY;
    int rising = 0;
    std::vector<double> next(n);
    for (int it = 0; it < cfg.max_iter; ++it) {
        const auto og = evaluate(res.w, data, params, cfg.lambda, ws);
        res.objective = og.objective;
        if (!std::isfinite(og.objective)) throw DivergenceError("GD objective became non-finite; reduce eta", it);
        rising = og.objective > prev_objective ? rising + 1 : 0;
        if (rising >= cfg.divergence_window) {
            throw DivergenceError("GD objective increased for " + std::to_string(rising) +
                                      " consecutive steps; reduce eta",
                                  it);
        }
        prev_objective = og.objective;
        if (observer) observer(it, res.w, og.objective);

        double diff = 0.0;
        for (int i = 0; i < n; ++i) {
            next[i] = res.w[i] - cfg.eta * og.gradient[i];
            diff += (next[i] - res.w[i]) * (next[i] - res.w[i]);
        }
        std::swap(res.w, next);
        res.iterations = it + 1;
        const double norm = norm2(res.w);
        const double rel = diff == 0.0 ? 0.0 : std::sqrt(diff) / norm;
        if (rel < cfg.eps_gd) {
            res.converged = true;
            break;
        }
    }
    if (observer) observer(res.iterations, res.w, evaluate(res.w, data, params, cfg.lambda, ws).objective);
    return res;
}

double delta_gd_amp(const std::vector<double>& w_gd, const std::vector<double>& w_amp) {
    if (w_gd.size() != w_amp.size()) throw InvalidArgument("vectors differ in length");
    const double denom = norm2(w_gd);
    if (!(denom > 0.0)) throw DegenerateInput("GD estimate has zero norm");
    double diff = 0.0;
    for (std::size_t i = 0; i < w_gd.size(); ++i) diff += (w_gd[i] - w_amp[i]) * (w_gd[i] - w_amp[i]);
    return std::sqrt(diff) / denom;
}

}  // namespace sslgmm
