#include "sslgmm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "sslgmm/errors.hpp"

namespace sslgmm {

namespace {

constexpr double rescale_limit = 1e150;

struct HermiteValue {
    double p_n;       // orthonormal Hermite polynomial of degree n, rescaled
    double p_nm1;     // degree n-1, same scale
    double log_scale; // true value = rescaled * exp(log_scale)
};

// Three-term recurrence for orthonormal Hermite polynomials (weight e^{-u^2}),
// renormalized on the fly so that large n and large |u| stay finite.
HermiteValue hermite(int n, double u) {
    double p1 = std::pow(std::numbers::pi, -0.25);
    double p2 = 0.0;
    double log_scale = 0.0;
    for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = u * std::sqrt(2.0 / j) * p2 - std::sqrt(double(j - 1) / j) * p3;
        if (std::abs(p1) > rescale_limit) {
            p1 /= rescale_limit;
            p2 /= rescale_limit;
            log_scale += std::log(rescale_limit);
        }
    }
    return {p1, p2, log_scale};
}

}  // namespace

GaussHermiteRule::GaussHermiteRule(int n) {
    if (n < 1) throw InvalidArgument("Gauss-Hermite rule needs at least one node");
    const int m = (n + 1) / 2;
    // Seeds: eigenvalues of the symmetric Jacobi matrix (zero diagonal, sqrt(j/2)
    // off-diagonal), ascending; each is then polished by Newton on the recurrence.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd off(std::max(n - 1, 0));
    for (int j = 1; j < n; ++j) off[j - 1] = std::sqrt(0.5 * j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    if (n > 1) solver.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
    std::vector<double> u(m), w(m);
    for (int i = 0; i < m; ++i) {
        double z = n > 1 ? solver.eigenvalues()[n - 1 - i] : 0.0;
        HermiteValue h{};
        for (int it = 0; it < 100; ++it) {
            h = hermite(n, z);
            const double step = h.p_n / (std::sqrt(2.0 * n) * h.p_nm1);
            z -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        h = hermite(n, z);
        const double log_derivative = 0.5 * std::log(2.0 * n) + std::log(std::abs(h.p_nm1)) + h.log_scale;
        u[i] = z;
        w[i] = std::exp(std::log(2.0) - 2.0 * log_derivative);
    }
    if (n % 2 == 1) u[m - 1] = 0.0;

    nodes_.resize(n);
    weights_.resize(n);
    const double node_scale = std::numbers::sqrt2;
    const double weight_scale = 1.0 / std::sqrt(std::numbers::pi);
    for (int i = 0; i < m; ++i) {
        nodes_[i] = -u[i] * node_scale;
        nodes_[n - 1 - i] = u[i] * node_scale;
        weights_[i] = weights_[n - 1 - i] = w[i] * weight_scale;
    }
}

const GaussHermiteRule& gauss_hermite_rule(int n) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<GaussHermiteRule>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<GaussHermiteRule>(n);
    return *slot;
}

GaussLegendreRule::GaussLegendreRule(int n) {
    if (n < 1) throw InvalidArgument("Gauss-Legendre rule needs at least one node");
    nodes_.resize(n);
    weights_.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = -std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-16) break;
        }
        nodes_[i] = x;
        weights_[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

const GaussLegendreRule& gauss_legendre_rule(int n) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<GaussLegendreRule>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<GaussLegendreRule>(n);
    return *slot;
}

std::vector<double> graded_breakpoints(double feature, double width, double z_max) {
    std::vector<double> cuts;
    // Unit panels in the bulk, double-width ones in the tails.
    for (double z = -z_max; z <= z_max + 1e-12; z += (z < -4.0 || z >= 4.0) ? 2.0 : 1.0) cuts.push_back(z);
    if (std::isfinite(feature) && std::abs(feature) < z_max) {
        cuts.push_back(feature);
        for (double d = std::max(width, 1e-12); d < 1.0; d *= 2.0) {
            for (double z : {feature - d, feature + d}) {
                if (std::abs(z) < z_max) cuts.push_back(z);
            }
        }
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> out;
    for (double z : cuts) {
        if (out.empty() || z - out.back() > 1e-14) out.push_back(z);
    }
    return out;
}

}  // namespace sslgmm
