#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "sslgmm/dataset.hpp"
#include "sslgmm/params.hpp"

namespace sslgmm {

struct GdConfig {
    double eta = 0.1;
    double eps_gd = 1e-5;
    int max_iter = 100000;
    double lambda = 2.0;
    int divergence_window = 50;  // consecutive objective increases that abort the run

    void validate() const;
};

struct ObjectiveGradient {
    double objective = 0.0;
    std::vector<double> gradient;
};

// Negative log posterior of the RMLE with Gaussian normalization constants dropped:
//   sum_L |x - y w/sqrt N|^2/(2 sigma2)
// - sum_U ln(rho e^{-|x - w/sqrt N|^2/(2 sigma2)} + (1-rho) e^{-|x + w/sqrt N|^2/(2 sigma2)})
// + lambda |w|^2 / 2, with lambda taken from params.lambda.
ObjectiveGradient objective_and_gradient(const std::vector<double>& w, const Dataset& data,
                                         const ModelParams& params);

struct GdResult {
    std::vector<double> w;
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
};

// Called with the iterate before each step (objective evaluated there) and once at exit.
using GdObserver = std::function<void(int iteration, const std::vector<double>& w, double objective)>;

// Fixed-step descent from init (zero vector when empty). cfg.lambda overrides params.lambda.
// Throws DivergenceError when the objective rises for cfg.divergence_window steps in a row.
GdResult run_gd(const Dataset& data, const GdConfig& cfg, const ModelParams& params,
                const std::vector<double>& init = {}, const GdObserver& observer = {});

// |w_gd - w_amp| / |w_gd|.
double delta_gd_amp(const std::vector<double>& w_gd, const std::vector<double>& w_amp);

struct ScalingFit {
    double delta0 = 0.0;
    double a = 0.0;
    double d = 0.0;
    double residual = 0.0;  // sum of squared residuals over per-N means
    bool converged = false;
    bool degenerate = false;  // amplitude ~ 0: exponent unidentifiable
    std::vector<int> n_values;
    std::vector<double> means;
    std::vector<double> std_errors;
    std::vector<double> bootstrap_samples;
    int bootstrap_failures = 0;
};

using DeltaSamples = std::map<int, std::vector<double>>;

// Least squares of delta0 + a N^-d on the per-N means, started at (min mean, 1, 0.5).
// Needs at least three distinct N; throws ConvergenceError when the solver fails.
ScalingFit fit_power_law(const DeltaSamples& samples);

struct BootstrapResult {
    std::vector<double> delta0;
    int failures = 0;
};

// Resamples each N's values with replacement and refits; failed refits are counted.
BootstrapResult bootstrap_delta0(const DeltaSamples& samples, int n_boot, std::uint64_t seed);

// Least-squares slope of log(mean delta) against log N.
double log_log_slope(const DeltaSamples& samples);

}  // namespace sslgmm
