#include "sslgmm/phase.hpp"

#include <cmath>

#include "sslgmm/csv.hpp"
#include "sslgmm/errors.hpp"
#include "sslgmm/potentials.hpp"

namespace sslgmm {

namespace {

constexpr double zero_threshold = 1e-5;

ModelParams with_mode(const ModelParams& params, EstimatorMode mode) {
    ModelParams p = params;
    p.mode = mode;
    return p;
}

void require_unlabeled(const ModelParams& params) {
    if (!(params.alpha_u > 0.0)) throw InvalidArgument("boundary requires alpha_u > 0");
}

double trivial_response(const ModelParams& params, double chi, EstimatorMode mode) {
    try {
        return evaluate_potential(mode, 0.0, chi / params.sigma2, params.rho, true).t_val;
    } catch (const SingularityError&) {
        return INFINITY;
    }
}

void require_symmetric(const ModelParams& params) {
    if (params.rho != 0.5 || params.alpha_l != 0.0) {
        throw InvalidArgument("the random branch exists only for rho = 1/2 and alpha_l = 0");
    }
}

}  // namespace

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::Undetected: return "undetected";
        case Phase::Detected: return "detected";
        case Phase::Rsb: return "rsb";
        case Phase::MixedTreatedAsRsb: return "mixed_rsb";
        case Phase::Indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

StabilityCoefficients trivial_point_linearization(const ModelParams& params, double chi, EstimatorMode mode) {
    if (params.alpha_u == 0.0) return {};
    const double t0 = trivial_response(params, chi, mode);
    const double s4 = params.sigma2 * params.sigma2;
    StabilityCoefficients c;
    c.k_lin = params.alpha_u * chi * t0 / (params.lambda0 * s4);
    c.v_lin = params.alpha_u * chi * chi * t0 * t0 / s4;
    c.at_integral = c.v_lin;
    return c;
}

double chi_undetected_branch(const ModelParams& params) {
    const double s2 = params.sigma2;
    const double lam = params.lambda;
    if (params.mode == EstimatorMode::Bayes) {
        if (!(lam > 0.0)) throw OutOfRange("undetected Bayes branch needs lambda > 0");
        return 1.0 / lam;
    }
    const double a = params.alpha_u / s2 + lam;
    const double b = 1.0 + lam * s2;
    const double disc = b * b - 4.0 * a * s2;
    if (disc < 0.0) throw OutOfRange("undetected solution absent at lambda=" + format_double(lam));
    if (!(a > 0.0)) throw OutOfRange("undetected branch needs alpha_u/sigma2 + lambda > 0");
    const double sign = lam * s2 <= 1.0 ? 1.0 : -1.0;
    return 0.5 * (b + sign * std::sqrt(disc)) / a;
}

double critical_chi_u_r(const ModelParams& params) {
    require_unlabeled(params);
    if (params.mode == EstimatorMode::Bayes) return params.sigma2 / std::sqrt(params.alpha_u);
    return params.sigma2 / (1.0 + std::sqrt(params.alpha_u));
}

double critical_chi_u_d(const ModelParams& params, EstimatorMode mode) {
    require_unlabeled(params);
    const double s2 = params.sigma2;
    if (mode == EstimatorMode::Bayes) return s2 * s2 * params.lambda0 / params.alpha_u;
    return s2 / (1.0 + params.alpha_u / (params.lambda0 * s2));
}

double random_branch_variance(const ModelParams& params, EstimatorMode mode, double chi, int nodes) {
    require_symmetric(params);
    require_unlabeled(params);
    const ModelParams p = with_mode(params, mode);
    const auto lin = trivial_point_linearization(p, chi, mode);
    if (!(lin.v_lin > 1.0)) throw OutOfRange("random branch absent at chi=" + format_double(chi));

    auto excess = [&](double v) {
        const auto in = se_integrals(p, chi, 0.0, v, nodes, false);
        return chi * chi * p.alpha_u * in.f2_mean / p.sigma2 - v;
    };
    // excess > 0 near v = 0 (v_lin > 1) and < 0 above the bound alpha_u chi^2/sigma2.
    double lo = 1e-300;
    double hi = p.alpha_u * chi * chi / p.sigma2 * (1.0 + 1e-9) + 1e-300;
    // Move lo up while the small-v expansion still holds, to avoid underflowed fields.
    for (double trial = 1e-12; trial < hi; trial *= 10.0) {
        if (excess(trial) > 0.0) {
            lo = trial;
        } else {
            break;
        }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (excess(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double detected_random_condition(const ModelParams& params, EstimatorMode mode, double chi, double v, int nodes) {
    const ModelParams p = with_mode(params, mode);
    double t_mean = 0.0;
    try {
        t_mean = se_integrals(p, chi, 0.0, v, nodes, true).t_mean;
    } catch (const SingularityError&) {
        return INFINITY;
    }
    return p.alpha_u * chi * t_mean / (p.lambda0 * p.sigma2 * p.sigma2) - 1.0;
}

double detected_random_boundary(const ModelParams& params, EstimatorMode mode, int nodes) {
    require_symmetric(params);
    ModelParams p = with_mode(params, mode);
    const double chi_ur = critical_chi_u_r(p);
    auto h = [&](double chi) {
        return detected_random_condition(p, mode, chi, random_branch_variance(p, mode, chi, nodes), nodes);
    };
    const double upper = mode == EstimatorMode::Rmle ? p.sigma2 * (1.0 - 1e-9) : 1e3 * p.sigma2;
    double lo = chi_ur * (1.0 + 1e-9);
    if (!(lo < upper)) throw OutOfRange("random branch absent below the singular point");
    double h_lo = h(lo);
    // March upward geometrically until h changes sign.
    double hi = lo;
    double h_hi = h_lo;
    const double step = std::pow(upper / lo, 1.0 / 200.0);
    while (hi < upper) {
        const double next = std::min(hi * step, upper);
        const double h_next = h(next);
        if ((h_next > 0.0) != (h_lo > 0.0)) {
            lo = hi;
            hi = next;
            h_hi = h_next;
            break;
        }
        hi = next;
        h_lo = h_next;
        if (hi >= upper) throw OutOfRange("no detected-random crossing on the random branch");
    }
    h_lo = h(lo);
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double hm = h(mid);
        if ((hm > 0.0) == (h_lo > 0.0)) {
            lo = mid;
            h_lo = hm;
        } else {
            hi = mid;
            h_hi = hm;
        }
    }
    (void)h_hi;
    return 0.5 * (lo + hi);
}

double at_instability(const ModelParams& params, double chi, const OrderParams& fixed_point, EstimatorMode mode,
                      int nodes) {
    const ModelParams p = with_mode(params, mode);
    if (p.alpha_u == 0.0) return 0.0;
    // For chi >= sigma2 the RMLE scalar problem is non-convex somewhere on the real line,
    // its minimizer jumps and the response carries a delta mass.
    if (mode == EstimatorMode::Rmle && p.rho > 0.0 && p.rho < 1.0 && chi >= p.sigma2) return INFINITY;
    try {
        const auto in = se_integrals(p, chi, fixed_point.k, fixed_point.v, nodes, true);
        return p.alpha_u * chi * chi * in.t2_mean / (p.sigma2 * p.sigma2);
    } catch (const SingularityError&) {
        return INFINITY;
    }
}

PhaseReport classify_phase(const ModelParams& params, double chi, EstimatorMode mode,
                           const ClassifyOptions& options) {
    const ModelParams p = with_mode(params, mode);
    p.validate();
    PhaseReport r;
    r.point = p;
    r.chi = chi;

    const auto unin = se_fixed_point(p, chi, branch_init(SeBranch::Uninformed, chi, p.lambda0), options.se);
    const auto inf = se_fixed_point(p, chi, branch_init(SeBranch::Informed, chi, p.lambda0), options.se);
    const SeFixedPoint& reached = std::abs(inf.op.k) >= zero_threshold ? inf : unin;
    r.k_star = reached.op.k;
    r.v_star = reached.op.v;

    const auto lin = trivial_point_linearization(p, chi, mode);
    r.stability.k_lin = lin.k_lin;
    r.stability.v_lin = lin.v_lin;
    r.stability.at_integral = at_instability(p, chi, reached.op, mode, options.se.quadrature_nodes);
    r.margin_k = lin.k_lin - 1.0;
    r.margin_v = lin.v_lin - 1.0;
    r.margin_at = r.stability.at_integral - 1.0;

    if (!unin.converged || !inf.converged) {
        r.phase = Phase::Indeterminate;
        r.raw_phase = "nonconverged";
        r.diagnostics = "SE did not converge (uninformed residual " + format_double(unin.residual) +
                        ", informed residual " + format_double(inf.residual) + ")";
        return r;
    }

    const bool k_zero = std::abs(r.k_star) < zero_threshold;
    const bool v_zero = std::abs(r.v_star) < zero_threshold;
    const bool at_unstable = r.stability.at_integral >= 1.0;
    if (k_zero && v_zero) {
        r.raw_phase = "undetected";
        if (lin.k_lin < 1.0 && lin.v_lin < 1.0) {
            r.phase = Phase::Undetected;
        } else if (at_unstable) {
            r.phase = Phase::Rsb;
        } else {
            r.phase = Phase::Indeterminate;
            r.diagnostics = "trivial fixed point reached although its linearization is unstable";
        }
    } else if (k_zero) {
        r.raw_phase = "random";
        r.phase = Phase::Rsb;
    } else if (at_unstable) {
        r.raw_phase = "mixed";
        r.phase = Phase::MixedTreatedAsRsb;
    } else {
        r.raw_phase = "detected";
        r.phase = Phase::Detected;
    }
    return r;
}

double bo_heatmap_boundary(const ModelParams& params) {
    double alpha_u = 0.0;
    if (params.mode == EstimatorMode::Bayes) {
        const double snr = params.snr();
        alpha_u = 1.0 / (snr * snr);
    } else {
        const double s2 = params.sigma2;
        alpha_u = ((params.lambda - params.lambda0) * s2 - 1.0) * params.lambda0 * s2;
    }
    if (alpha_u < 0.0) throw OutOfRange("boundary lies outside the physical region (alpha_u < 0)");
    return alpha_u;
}

std::vector<NishimoriPoint> nishimori_line(const ModelParams& params, const std::vector<double>& alpha_u_grid,
                                           const SeOptions& options) {
    if (params.mode != EstimatorMode::Bayes) throw InvalidArgument("the Nishimori line is defined for Bayes");
    if (params.lambda != params.lambda0) throw InvalidArgument("the Nishimori line requires lambda = lambda0");
    std::vector<NishimoriPoint> out;
    out.reserve(alpha_u_grid.size());
    for (double a : alpha_u_grid) {
        ModelParams p = params;
        p.alpha_u = a;
        NishimoriPoint pt;
        pt.alpha_u = a;
        pt.chi = chi_from_lambda(p, p.lambda0, SeBranch::Informed, options);
        SeOptions tight = options;
        tight.eps = std::min(options.eps, 1e-12);
        const auto fp = se_fixed_point(p, pt.chi, branch_init(SeBranch::Informed, pt.chi, p.lambda0), tight);
        pt.k_star = fp.op.k;
        pt.v_star = fp.op.v;
        pt.at_integral = at_instability(p, pt.chi, fp.op, EstimatorMode::Bayes, options.quadrature_nodes);
        out.push_back(pt);
    }
    return out;
}

}  // namespace sslgmm
