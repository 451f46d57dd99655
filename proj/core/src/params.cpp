#include "sslgmm/params.hpp"

#include <cmath>

#include "sslgmm/errors.hpp"

namespace sslgmm {

std::string_view to_string(EstimatorMode mode) {
    return mode == EstimatorMode::Rmle ? "rmle" : "bayes";
}

EstimatorMode parse_estimator_mode(std::string_view text) {
    if (text == "rmle" || text == "RMLE") return EstimatorMode::Rmle;
    if (text == "bayes" || text == "Bayes" || text == "BAYES") return EstimatorMode::Bayes;
    throw InvalidArgument("unknown estimator mode '" + std::string(text) + "'");
}

int ModelParams::labeled_count() const {
    return static_cast<int>(std::lround(alpha_l * n_dim));
}

int ModelParams::unlabeled_count() const {
    return static_cast<int>(std::lround(alpha_u * n_dim));
}

void ModelParams::validate() const {
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in [0, 1]");
    if (!(lambda0 > 0.0)) throw InvalidArgument("lambda0 must be positive");
    if (!(sigma2 > 0.0)) throw InvalidArgument("sigma2 must be positive");
    if (!(alpha_l >= 0.0)) throw InvalidArgument("alpha_l must be non-negative");
    if (!(alpha_u >= 0.0)) throw InvalidArgument("alpha_u must be non-negative");
    if (!std::isfinite(lambda)) throw InvalidArgument("lambda must be finite");
    if (n_dim < 1) throw InvalidArgument("n_dim must be at least 1");
}

}  // namespace sslgmm
