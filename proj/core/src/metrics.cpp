#include "sslgmm/metrics.hpp"

#include <cmath>
#include <numeric>

#include "sslgmm/errors.hpp"
#include "sslgmm/potentials.hpp"

namespace sslgmm {

double mse_from_order_params(double k, double v, double lambda0) {
    return (k - 1.0) * (k - 1.0) / lambda0 + v;
}

double decision_offset(const ModelParams& params) {
    if (params.rho >= 1.0) return INFINITY;
    if (params.rho <= 0.0) return -INFINITY;
    return 0.5 * params.sigma2 * (std::log(params.rho) - std::log1p(-params.rho));
}

int predict_label(std::span<const double> w_hat, std::span<const double> x_new, const ModelParams& params) {
    if (w_hat.empty() || w_hat.size() != x_new.size()) {
        throw InvalidArgument("predict_label needs non-empty vectors of equal length");
    }
    const double field = std::inner_product(w_hat.begin(), w_hat.end(), x_new.begin(), 0.0) /
                         std::sqrt(double(w_hat.size()));
    return field + decision_offset(params) >= 0.0 ? 1 : -1;
}

double ge_from_order_params(double k, double v, const ModelParams& params) {
    const double spread = k * k / params.lambda0 + v;
    if (!(spread > 0.0)) throw DegenerateInput("generalization error undefined at k = v = 0");
    const double s = std::sqrt(params.sigma2 * spread);
    const double b = decision_offset(params);
    const double m = k / params.lambda0;
    double ge = 0.0;
    if (params.rho > 0.0) ge += params.rho * gaussian_tail_q((m + b) / s);
    if (params.rho < 1.0) ge += (1.0 - params.rho) * gaussian_tail_q((m - b) / s);
    return ge;
}

ErrorReport error_report(double k, double v, const ModelParams& params) {
    return {mse_from_order_params(k, v, params.lambda0), ge_from_order_params(k, v, params), k, v,
            decision_offset(params)};
}

}  // namespace sslgmm
