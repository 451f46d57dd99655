#pragma once

#include <string>
#include <string_view>

namespace sslgmm {

enum class EstimatorMode { Rmle, Bayes };

std::string_view to_string(EstimatorMode mode);
EstimatorMode parse_estimator_mode(std::string_view text);

// Teacher/student parameters of the two-cluster mixture. alpha_l and alpha_u are
// sample counts per dimension; lambda is the student ridge strength, lambda0 the
// teacher prior precision.
struct ModelParams {
    double rho = 0.5;
    double lambda0 = 1.0;
    double lambda = 1.0;
    double sigma2 = 1.0;
    double alpha_l = 0.0;
    double alpha_u = 0.0;
    int n_dim = 1000;
    EstimatorMode mode = EstimatorMode::Rmle;

    double alpha() const { return alpha_l + alpha_u; }
    double snr() const { return 1.0 / (lambda0 * sigma2); }
    int labeled_count() const;
    int unlabeled_count() const;

    // Throws InvalidArgument on rho outside [0,1], non-positive lambda0/sigma2,
    // negative alphas or n_dim < 1.
    void validate() const;
};

}  // namespace sslgmm
