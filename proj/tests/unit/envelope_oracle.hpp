#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

// Brute-force reference for max_y [-y^2/2 + ln(rho e^{q} + (1-rho) e^{-q})], q = p + sqrt(t) y.
// A fine grid locates every local maximum; each is then refined by bisection on the derivative.
namespace test_oracle {

inline double objective(double y, double p, double t, double rho) {
    const double q = p + std::sqrt(t) * y;
    const double a = std::log(rho) + q;
    const double b = std::log(1.0 - rho) - q;
    const double m = std::max(a, b);
    return -0.5 * y * y + m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double derivative(double y, double p, double t, double rho) {
    const double s = std::sqrt(t);
    return -y + s * std::tanh(p + s * y + 0.5 * std::log(rho / (1.0 - rho)));
}

// Returns the maximum value; optionally the maximizer and the gap to the runner-up local maximum
// (+inf when the maximum is unique).
inline double envelope(double p, double t, double rho, double* y_out = nullptr, double* gap_out = nullptr) {
    const double s = std::sqrt(t);
    const double h = 1e-3;
    const double lo = -s - 1.0;
    const int n = static_cast<int>((2.0 * s + 2.0) / h) + 1;
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = objective(lo + i * h, p, t, rho);
    double best = -INFINITY, second = -INFINITY, best_y = 0.0;
    for (int i = 1; i + 1 < n; ++i) {
        if (!(g[i] >= g[i - 1] && g[i] > g[i + 1])) continue;
        double a = lo + (i - 1) * h, b = lo + (i + 1) * h;
        for (int it = 0; it < 200 && b - a > 0.0; ++it) {
            const double c = 0.5 * (a + b);
            if (c == a || c == b) break;
            (derivative(c, p, t, rho) > 0.0 ? a : b) = c;
        }
        const double y = 0.5 * (a + b);
        const double v = objective(y, p, t, rho);
        if (v > best) {
            second = best;
            best = v;
            best_y = y;
        } else if (v > second) {
            second = v;
        }
    }
    if (y_out) *y_out = best_y;
    if (gap_out) *gap_out = best - second;
    return best;
}

}  // namespace test_oracle
