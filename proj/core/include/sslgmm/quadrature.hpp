#pragma once

#include <span>
#include <vector>

namespace sslgmm {

// Gauss-Hermite rule rewritten for the standard normal measure Dz: nodes z_i = sqrt(2) u_i
// and weights w_i / sqrt(pi), so that sum_i weight_i f(z_i) ~ E[f(z)], z ~ N(0,1).
class GaussHermiteRule {
public:
    explicit GaussHermiteRule(int n);

    int size() const { return static_cast<int>(nodes_.size()); }
    std::span<const double> nodes() const { return nodes_; }
    std::span<const double> weights() const { return weights_; }

    template <class F>
    double integrate(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * f(nodes_[i]);
        return s;
    }

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

// Process-wide cache; the returned reference stays valid for the program lifetime.
const GaussHermiteRule& gauss_hermite_rule(int n);

template <class F>
double gauss_integral(F&& f, int nodes = 201) {
    return gauss_hermite_rule(nodes).integrate(f);
}

// Gauss-Legendre rule on [-1, 1].
class GaussLegendreRule {
public:
    explicit GaussLegendreRule(int n);

    int size() const { return static_cast<int>(nodes_.size()); }
    std::span<const double> nodes() const { return nodes_; }
    std::span<const double> weights() const { return weights_; }

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

const GaussLegendreRule& gauss_legendre_rule(int n);

// Panel breakpoints on [-z_max, z_max] (z_max an even integer >= 4), plus a geometric refinement
// (ratio 2) down to `width` on both sides of `feature`, where the integrand may peak sharply or jump.
std::vector<double> graded_breakpoints(double feature, double width, double z_max = 8.0);

}  // namespace sslgmm
