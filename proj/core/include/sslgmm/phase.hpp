#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sslgmm/params.hpp"
#include "sslgmm/state_evolution.hpp"

namespace sslgmm {

enum class Phase { Undetected, Detected, Rsb, MixedTreatedAsRsb, Indeterminate };

std::string_view to_string(Phase phase);

struct StabilityCoefficients {
    double k_lin = 0.0;        // growth factor of k around the trivial point
    double v_lin = 0.0;        // growth factor of v around the trivial point
    double at_integral = 0.0;  // local instability of BP at the reached fixed point
};

struct PhaseReport {
    ModelParams point;
    double chi = 0.0;
    Phase phase = Phase::Indeterminate;
    std::string raw_phase;  // undetected / detected / random / mixed / nonconverged
    double k_star = 0.0;
    double v_star = 0.0;
    StabilityCoefficients stability;
    // k_lin - 1, v_lin - 1, at_integral - 1.
    double margin_k = 0.0;
    double margin_v = 0.0;
    double margin_at = 0.0;
    std::string diagnostics;
};

// Trivial-point linearization: k_lin = alpha_u chi T(0)/(lambda0 sigma2^2),
// v_lin = alpha_u chi^2 T(0)^2 / sigma2^2 (T = RMLE response or its Bayes counterpart).
// Infinite when the RMLE response is singular at p = 0.
StabilityCoefficients trivial_point_linearization(const ModelParams& params, double chi, EstimatorMode mode);

// chi on the undetected RMLE branch at params.lambda: the root of
// (alpha_u/sigma2 + lambda) chi^2 - (1 + lambda sigma2) chi + sigma2 = 0 that connects to
// chi = 1/lambda as alpha_u -> 0 (the "+" root when lambda sigma2 <= 1, "-" otherwise).
// Bayes mode returns 1/lambda. Throws OutOfRange on a negative discriminant.
double chi_undetected_branch(const ModelParams& params);

// Undetected-random boundary: RMLE sigma2/(1+sqrt(alpha_u)), Bayes sigma2/sqrt(alpha_u);
// mode taken from params. Throws InvalidArgument for alpha_u = 0.
double critical_chi_u_r(const ModelParams& params);

// Undetected-detected boundary: RMLE sigma2/(1 + alpha_u/(lambda0 sigma2)),
// Bayes sigma2^2 lambda0 / alpha_u.
double critical_chi_u_d(const ModelParams& params, EstimatorMode mode);

// Variance of the k = 0, v != 0 fixed point (symmetric unlabeled case only).
// Throws OutOfRange when that branch does not exist (v_lin <= 1).
double random_branch_variance(const ModelParams& params, EstimatorMode mode, double chi, int nodes = 201);

// alpha_u chi/(lambda0 sigma2^2) E[T(sqrt(v/sigma2) z)] - 1; vanishes on the
// detected-random boundary when v is the random-branch variance.
double detected_random_condition(const ModelParams& params, EstimatorMode mode, double chi, double v,
                                 int nodes = 201);

// RS-level estimate of the detected-random boundary (approximate: it lies inside the
// RSB region). Requires rho = 1/2 and alpha_l = 0; throws OutOfRange if no sign change.
double detected_random_boundary(const ModelParams& params, EstimatorMode mode, int nodes = 201);

// (alpha_u chi^2/sigma2^2) E[rho T(P)^2 + (1-rho) T(Q)^2]; >= 1 flags RSB.
// Returns +inf where the RMLE response is singular, including chi >= sigma2 (non-convex scalar problem).
double at_instability(const ModelParams& params, double chi, const OrderParams& fixed_point, EstimatorMode mode,
                      int nodes = 201);

struct ClassifyOptions {
    SeOptions se{201, 1e-10, 20000, 0.0};
};

PhaseReport classify_phase(const ModelParams& params, double chi, EstimatorMode mode,
                           const ClassifyOptions& options = {});

// Bayes: alpha_u = SNR^-2. RMLE: alpha_u = ((lambda - lambda0) sigma2 - 1) lambda0 sigma2.
// Throws OutOfRange for a negative result.
double bo_heatmap_boundary(const ModelParams& params);

struct NishimoriPoint {
    double alpha_u = 0.0;
    double chi = 0.0;
    double k_star = 0.0;
    double v_star = 0.0;
    double at_integral = 0.0;
};

// Bayes at lambda = lambda0 for each alpha_u. Requires params.mode == Bayes and
// params.lambda == params.lambda0.
std::vector<NishimoriPoint> nishimori_line(const ModelParams& params, const std::vector<double>& alpha_u_grid,
                                           const SeOptions& options = {});

}  // namespace sslgmm
