#pragma once

#include <functional>
#include <string_view>

#include "sslgmm/params.hpp"

namespace sslgmm {

// Bayes-optimal posterior mean of the hidden label given local field p:
// tanh(p + ln(rho/(1-rho))/2), with exact +-1 at rho in {1, 0}.
double f_tilde(double p, double rho);

// Derivative of f_tilde; equals 1 - f_tilde^2.
double t_tilde(double p, double rho);

// g(y|p,t) = ln(rho e^{p+sqrt(t) y} + (1-rho) e^{-(p+sqrt(t) y)}), and the saddle
// objective G = -y^2/2 + g.
double log_partition(double y, double p, double t, double rho);
double saddle_objective(double y, double p, double t, double rho);

// Global maximizer of the saddle objective in y. For t <= 1 the stationarity condition
// y = sqrt(t) f_tilde(p + sqrt(t) y) has a unique root; for t > 1 the objective can be
// bimodal and the larger local maximum is returned (exact ties go to the first found).
double solve_y_star(double p, double t, double rho);

// RMLE effective potentials F(p,t) = f_tilde(p + sqrt(t) y*) and
// T(p,t) = (1-F^2) / (1 - t(1-F^2)). t_rmle throws SingularityError when the
// denominator is <= 1e-10.
double f_rmle(double p, double t, double rho);
double t_rmle(double p, double t, double rho);

// Q(x) = erfc(x / sqrt(2)) / 2.
double gaussian_tail_q(double x);

struct PotentialEval {
    double p = 0.0;
    double t = 0.0;
    double y_star = 0.0;
    double f_val = 0.0;
    double t_val = 0.0;
    double g_val = 0.0;
};

// Bayes ignores t. with_t=false skips the response (and its singularity check).
PotentialEval evaluate_potential(EstimatorMode mode, double p, double t, double rho, bool with_t = true);

// Destination of degeneracy warnings (twin maxima). Default writes to stderr once.
void set_warning_handler(std::function<void(std::string_view)> handler);
void emit_warning(std::string_view message);

}  // namespace sslgmm
