#pragma once

#include <string_view>
#include <vector>

#include "sslgmm/params.hpp"
#include "sslgmm/state_evolution.hpp"

namespace sslgmm {

enum class Metric { Mse, Ge };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);

struct BoReference {
    double chi = 0.0;
    double k = 0.0;
    double v = 0.0;
    double mse = 0.0;
    double ge = 0.0;
};

// Bayes estimator at lambda = lambda0 on the informed branch.
BoReference bo_reference(const ModelParams& params, const SeOptions& options = {});

struct OptimalLambdaOptions {
    double inv_lambda_min = 0.01;
    double inv_lambda_max = 1.2;
    int coarse_points = 24;
    double flat_tolerance = 1e-9;
    double chi_tolerance = 1e-10;
    SeOptions se{201, 1e-12, 20000, 0.0};
};

struct OptimalLambdaCurvePoint {
    double chi = 0.0;
    double inv_lambda = 0.0;
    double k = 0.0;
    double v = 0.0;
    double mse = 0.0;
    double ge = 0.0;
};

struct OptimalLambdaResult {
    double lambda_star = 0.0;      // nan when flat
    double inv_lambda_star = 0.0;  // nan when flat
    double chi_star = 0.0;
    double error_at_star = 0.0;
    double bo_error = 0.0;
    bool flat = false;             // error varies by < flat_tolerance over the bracket
    bool fallback_used = false;    // coarse curve was not unimodal
    std::vector<OptimalLambdaCurvePoint> curve;  // coarse curve, ascending in 1/lambda
};

// RMLE error minimized over 1/lambda in (inv_lambda_min, inv_lambda_max]. The search runs in
// chi on the informed branch: the bracket ends are mapped through chi_from_lambda and
// every trial point's lambda is recovered from lambda_from_chi.
OptimalLambdaResult search_optimal_lambda(const ModelParams& params, Metric metric,
                                          const OptimalLambdaOptions& options = {});

struct GapPoint {
    double snr = 0.0;
    double alpha_u = 0.0;
    double rho = 0.0;
    double rmle_error = 0.0;
    double bo_error = 0.0;
    double relative_gap = 0.0;
    double inv_lambda_star = 0.0;
    bool flat = false;
    bool fallback_used = false;
};

// One optimal-lambda search per SNR value (sigma2 = 1/(lambda0 snr)).
std::vector<GapPoint> gap_curve(const ModelParams& params, Metric metric, const std::vector<double>& snr_grid,
                                const OptimalLambdaOptions& options = {});

}  // namespace sslgmm
