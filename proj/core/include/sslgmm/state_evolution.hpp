#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sslgmm/params.hpp"

namespace sslgmm {

// Macroscopic state: overlap k = w.w0/|w0|^2 and residual variance v, at fixed chi.
struct OrderParams {
    double chi = 0.0;
    double k = 0.0;
    double v = 0.0;
    double v_tilde = 0.0;  // k^2/lambda0 + v
    int iter = 0;
};

OrderParams make_order_params(double chi, double k, double v, double lambda0, int iter = 0);

struct SeOptions {
    int quadrature_nodes = 201;
    double eps = 1e-8;
    int max_iter = 20000;
    double damping = 0.0;  // fraction of the previous iterate kept
};

// Gaussian averages over the two cluster fields P (y=+1) and Q (y=-1):
// f_mean  = E[rho F(P) - (1-rho) F(Q)]
// f2_mean = E[rho F(P)^2 + (1-rho) F(Q)^2]
// t_mean  = E[rho T(P) + (1-rho) T(Q)]
// t2_mean = E[rho T(P)^2 + (1-rho) T(Q)^2]
struct SeIntegrals {
    double f_mean = 0.0;
    double f2_mean = 0.0;
    double t_mean = 0.0;
    double t2_mean = 0.0;
};

// Uses params.mode. with_t evaluates the response terms (may throw SingularityError for RMLE).
SeIntegrals se_integrals(const ModelParams& params, double chi, double k, double v, int nodes, bool with_t);

OrderParams se_step_rmle(const OrderParams& current, const ModelParams& params, double chi_fixed,
                         int nodes = 201);
OrderParams se_step_bayes(const OrderParams& current, const ModelParams& params, double chi_fixed,
                          int nodes = 201);
OrderParams se_step(const OrderParams& current, const ModelParams& params, double chi_fixed, int nodes = 201);

struct SeFixedPoint {
    OrderParams op;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

// Iterates until |dk| + |dv| < eps (1 + |k| + |v|); never throws on non-convergence.
SeFixedPoint se_fixed_point(const ModelParams& params, double chi, const OrderParams& init,
                            const SeOptions& options = {});

// States t = 0..steps (inclusive of the initial condition).
std::vector<OrderParams> se_trajectory(const ModelParams& params, double chi, const OrderParams& init, int steps,
                                       int nodes = 201);

// Ridge strength consistent with a fixed point at chi:
// lambda = 1/chi - alpha/sigma2 + (alpha_u/sigma2) t_mean.
double lambda_from_chi(const ModelParams& params, double chi, const OrderParams& fixed_point, int nodes = 201);

enum class SeBranch { Informed, Uninformed };

std::string_view to_string(SeBranch branch);
SeBranch parse_se_branch(std::string_view text);

// Informed: (k, v) = (1, 0). Uninformed: (1e-6, 1e-6).
OrderParams branch_init(SeBranch branch, double chi, double lambda0);

// Phase tag of a fixed point: "undetected" (k, v ~ 0), "random" (k ~ 0, v > 0),
// "detected" (k > 0), "nonconverged", "singular".
std::string fixed_point_tag(const SeFixedPoint& fp);

struct LambdaChiRow {
    double chi = 0.0;
    double lambda = 0.0;
    double k_star = 0.0;
    double v_star = 0.0;
    std::string phase;
};

struct LambdaChiTable {
    std::vector<LambdaChiRow> rows;
    // lambda strictly decreasing in chi across all finite rows; otherwise the chis where
    // monotonicity breaks are listed as phase-transition markers.
    bool monotone = true;
    std::vector<double> transition_chis;
};

// chi_grid must be strictly increasing. Rows where the RMLE response is singular are
// kept with lambda = nan and phase "singular".
LambdaChiTable build_lambda_chi_table(const ModelParams& params, const std::vector<double>& chi_grid,
                                      SeBranch branch, const SeOptions& options = {});

void write_lambda_chi_csv(std::ostream& out, const LambdaChiTable& table);
LambdaChiTable read_lambda_chi_csv(std::istream& in);

// Smallest chi on the requested branch with lambda_from_chi(chi) == lambda, found by
// bisection inside a bracket from a cached coarse table. Throws OutOfRange if the
// coarse table has no bracket.
double chi_from_lambda(const ModelParams& params, double lambda, SeBranch branch, const SeOptions& options = {});

// Coarse table used by chi_from_lambda: log-spaced chi in [1e-6, 10 sigma2]. Tables are
// memoized per content hash of (params without lambda, branch, quadrature size); when
// the SSL_GMM_LAB_CACHE environment variable names a directory they are also persisted
// there as CSV.
const LambdaChiTable& cached_lambda_chi_table(const ModelParams& params, SeBranch branch,
                                              const SeOptions& options = {});

std::string lambda_chi_cache_key(const ModelParams& params, SeBranch branch, int nodes);

}  // namespace sslgmm
