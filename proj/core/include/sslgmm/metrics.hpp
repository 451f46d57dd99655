#pragma once

#include <span>

#include "sslgmm/params.hpp"

namespace sslgmm {

struct ErrorReport {
    double mse = 0.0;
    double ge = 0.0;
    double k = 0.0;
    double v = 0.0;
    double b = 0.0;
};

// (k - 1)^2 / lambda0 + v.
double mse_from_order_params(double k, double v, double lambda0);

// Decision offset (sigma2/2) ln(rho/(1-rho)); +-inf at rho in {1, 0}.
double decision_offset(const ModelParams& params);

// sign(w.x/sqrt(N) + b); an argument of exactly zero maps to +1.
int predict_label(std::span<const double> w_hat, std::span<const double> x_new, const ModelParams& params);

// rho Q((k/lambda0 + b)/s) + (1 - rho) Q((k/lambda0 - b)/s), s = sqrt(sigma2 (k^2/lambda0 + v)).
// Throws DegenerateInput when k^2/lambda0 + v == 0.
double ge_from_order_params(double k, double v, const ModelParams& params);

ErrorReport error_report(double k, double v, const ModelParams& params);

}  // namespace sslgmm
