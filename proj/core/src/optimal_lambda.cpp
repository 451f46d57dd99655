#include "sslgmm/optimal_lambda.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sslgmm/errors.hpp"
#include "sslgmm/metrics.hpp"

namespace sslgmm {

namespace {

struct Evaluated {
    OptimalLambdaCurvePoint point;
    double error = 0.0;
};

Evaluated evaluate_at(const ModelParams& p, double chi, Metric metric, const SeOptions& se) {
    const auto fp = se_fixed_point(p, chi, branch_init(SeBranch::Informed, chi, p.lambda0), se);
    if (!fp.converged) throw ConvergenceError("SE did not converge at chi=" + std::to_string(chi), fp.residual);
    Evaluated e;
    e.point.chi = chi;
    e.point.k = fp.op.k;
    e.point.v = fp.op.v;
    e.point.mse = mse_from_order_params(fp.op.k, fp.op.v, p.lambda0);
    e.point.ge = ge_from_order_params(fp.op.k, fp.op.v, p);
    e.point.inv_lambda = 1.0 / lambda_from_chi(p, chi, fp.op, se.quadrature_nodes);
    e.error = metric == Metric::Mse ? e.point.mse : e.point.ge;
    return e;
}

// Largest chi of the coarse informed table whose lambda is still finite.
double last_finite_chi(const ModelParams& p, const SeOptions& se) {
    const auto& table = cached_lambda_chi_table(p, SeBranch::Informed, se);
    double chi = NAN;
    for (const auto& r : table.rows) {
        if (std::isfinite(r.lambda) && r.lambda > 0.0) chi = r.chi;
    }
    if (!std::isfinite(chi)) throw OutOfRange("informed branch has no finite lambda");
    return chi;
}

Evaluated golden_section(const ModelParams& p, double a, double b, Metric metric, const SeOptions& se, double tol) {
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    Evaluated ec = evaluate_at(p, c, metric, se);
    Evaluated ed = evaluate_at(p, d, metric, se);
    while (b - a > tol * std::max(1.0, std::abs(b))) {
        if (ec.error <= ed.error) {
            b = d;
            d = c;
            ed = ec;
            c = b - inv_phi * (b - a);
            ec = evaluate_at(p, c, metric, se);
        } else {
            a = c;
            c = d;
            ec = ed;
            d = a + inv_phi * (b - a);
            ed = evaluate_at(p, d, metric, se);
        }
    }
    return ec.error <= ed.error ? ec : ed;
}

bool unimodal(const std::vector<Evaluated>& curve, std::size_t argmin) {
    for (std::size_t j = 1; j <= argmin; ++j) {
        if (curve[j].error > curve[j - 1].error) return false;
    }
    for (std::size_t j = argmin + 1; j < curve.size(); ++j) {
        if (curve[j].error < curve[j - 1].error) return false;
    }
    return true;
}

std::vector<Evaluated> sample_curve(const ModelParams& p, double chi_lo, double chi_hi, int points, Metric metric,
                                    const SeOptions& se) {
    std::vector<Evaluated> curve;
    curve.reserve(points);
    for (int j = 0; j < points; ++j) {
        const double chi = chi_lo + (chi_hi - chi_lo) * j / (points - 1);
        curve.push_back(evaluate_at(p, chi, metric, se));
    }
    return curve;
}

std::size_t argmin_of(const std::vector<Evaluated>& curve) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < curve.size(); ++j) {
        if (curve[j].error < curve[best].error) best = j;
    }
    return best;
}

}  // namespace

std::string_view to_string(Metric metric) { return metric == Metric::Mse ? "mse" : "ge"; }

Metric parse_metric(std::string_view text) {
    if (text == "mse") return Metric::Mse;
    if (text == "ge") return Metric::Ge;
    throw InvalidArgument("unknown metric '" + std::string(text) + "'");
}

BoReference bo_reference(const ModelParams& params, const SeOptions& options) {
    ModelParams b = params;
    b.mode = EstimatorMode::Bayes;
    b.lambda = b.lambda0;
    SeOptions se = options;
    se.eps = std::min(se.eps, 1e-12);
    BoReference ref;
    ref.chi = chi_from_lambda(b, b.lambda0, SeBranch::Informed, se);
    const auto fp = se_fixed_point(b, ref.chi, branch_init(SeBranch::Informed, ref.chi, b.lambda0), se);
    ref.k = fp.op.k;
    ref.v = fp.op.v;
    ref.mse = mse_from_order_params(ref.k, ref.v, b.lambda0);
    ref.ge = ge_from_order_params(ref.k, ref.v, b);
    return ref;
}

OptimalLambdaResult search_optimal_lambda(const ModelParams& params, Metric metric,
                                          const OptimalLambdaOptions& options) {
    ModelParams p = params;
    p.mode = EstimatorMode::Rmle;
    p.validate();
    if (!(options.inv_lambda_min > 0.0 && options.inv_lambda_max > options.inv_lambda_min)) {
        throw InvalidArgument("invalid 1/lambda search bracket");
    }
    if (options.coarse_points < 3) throw InvalidArgument("search needs at least three coarse points");
    const SeOptions& se = options.se;

    const double chi_lo = chi_from_lambda(p, 1.0 / options.inv_lambda_min, SeBranch::Informed, se);
    double chi_hi = 0.0;
    try {
        chi_hi = chi_from_lambda(p, 1.0 / options.inv_lambda_max, SeBranch::Informed, se);
    } catch (const OutOfRange&) {
        chi_hi = last_finite_chi(p, se);
    }

    OptimalLambdaResult res;
    auto curve = sample_curve(p, chi_lo, chi_hi, options.coarse_points, metric, se);
    std::size_t best = argmin_of(curve);
    const auto [mn, mx] = std::minmax_element(curve.begin(), curve.end(),
                                              [](const auto& a, const auto& b) { return a.error < b.error; });
    if (mx->error - mn->error < options.flat_tolerance) {
        res.flat = true;
        res.lambda_star = NAN;
        res.inv_lambda_star = NAN;
        res.chi_star = NAN;
        res.error_at_star = mn->error;
    } else {
        if (!unimodal(curve, best)) {
            res.fallback_used = true;
            curve = sample_curve(p, chi_lo, chi_hi, 4 * options.coarse_points, metric, se);
            best = argmin_of(curve);
        }
        const double a = curve[best == 0 ? 0 : best - 1].point.chi;
        const double b = curve[std::min(best + 1, curve.size() - 1)].point.chi;
        const auto opt = golden_section(p, a, b, metric, se, options.chi_tolerance);
        res.chi_star = opt.point.chi;
        res.inv_lambda_star = opt.point.inv_lambda;
        res.lambda_star = 1.0 / opt.point.inv_lambda;
        res.error_at_star = opt.error;
    }
    const auto bo = bo_reference(params, se);
    res.bo_error = metric == Metric::Mse ? bo.mse : bo.ge;
    res.curve.reserve(curve.size());
    for (const auto& e : curve) res.curve.push_back(e.point);
    std::sort(res.curve.begin(), res.curve.end(),
              [](const auto& x, const auto& y) { return x.inv_lambda < y.inv_lambda; });
    return res;
}

std::vector<GapPoint> gap_curve(const ModelParams& params, Metric metric, const std::vector<double>& snr_grid,
                                const OptimalLambdaOptions& options) {
    std::vector<GapPoint> out;
    out.reserve(snr_grid.size());
    for (double snr : snr_grid) {
        if (!(snr > 0.0)) throw InvalidArgument("SNR must be positive");
        ModelParams p = params;
        p.sigma2 = 1.0 / (p.lambda0 * snr);
        const auto r = search_optimal_lambda(p, metric, options);
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
        out.push_back(g);
    }
    return out;
}

}  // namespace sslgmm
