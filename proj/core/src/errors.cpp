#include "sslgmm/errors.hpp"

namespace sslgmm {

DivergenceError::DivergenceError(const std::string& what, int iteration)
    : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

ConvergenceError::ConvergenceError(const std::string& what, double residual)
    : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

}  // namespace sslgmm
