#include "sslgmm/potentials.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include "sslgmm/errors.hpp"

namespace sslgmm {

namespace {

constexpr double singular_threshold = 1e-10;
constexpr double root_tolerance = 1e-13;
constexpr int max_root_iterations = 400;
constexpr double scan_step = 0.01;

std::mutex warning_mutex;
std::function<void(std::string_view)> warning_handler;
std::atomic<bool> default_warned{false};

// Two exponents of the label posterior, in log space.
struct LogWeights {
    double a;
    double b;
};

LogWeights log_weights(double q, double rho) {
    return {std::log(rho) + q, std::log1p(-rho) - q};
}

double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double stationarity_residual(double y, double p, double sqrt_t, double rho) {
    return y - sqrt_t * f_tilde(p + sqrt_t * y, rho);
}

// Root of the (increasing) residual inside [lo, hi], with r(lo) <= 0 <= r(hi).
double safeguarded_newton(double y, double lo, double hi, double p, double t, double rho) {
    const double sqrt_t = std::sqrt(t);
    for (int it = 0; it < max_root_iterations; ++it) {
        const double r = stationarity_residual(y, p, sqrt_t, rho);
        if (std::abs(r) <= root_tolerance) return y;
        if (r < 0.0) {
            lo = y;
        } else {
            hi = y;
        }
        if (hi - lo <= 4e-16 * std::max(1.0, std::abs(y))) return y;
        const double slope = 1.0 - t * t_tilde(p + sqrt_t * y, rho);
        double next = slope > 0.0 ? y - r / slope : lo - 1.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        y = next;
    }
    return y;
}

// Maximizes the saddle objective on [a, b] when the residual has no usable sign change.
double golden_maximize(double a, double b, double p, double t, double rho) {
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double gc = saddle_objective(c, p, t, rho);
    double gd = saddle_objective(d, p, t, rho);
    while (b - a > 1e-12) {
        if (gc >= gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = saddle_objective(c, p, t, rho);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = saddle_objective(d, p, t, rho);
        }
    }
    return 0.5 * (a + b);
}

double refine_local_max(double a, double b, double p, double t, double rho) {
    const double sqrt_t = std::sqrt(t);
    const double ra = stationarity_residual(a, p, sqrt_t, rho);
    const double rb = stationarity_residual(b, p, sqrt_t, rho);
    if (ra <= 0.0 && rb >= 0.0) return safeguarded_newton(0.5 * (a + b), a, b, p, t, rho);
    return golden_maximize(a, b, p, t, rho);
}

// t > 1: scan the objective on a grid covering every stationary point (|y| <= sqrt t),
// then refine each local maximum and keep the best.
double solve_y_star_multimodal(double p, double t, double rho) {
    const double sqrt_t = std::sqrt(t);
    const double lo = -sqrt_t - scan_step;
    const int n = static_cast<int>(std::ceil(2.0 * (sqrt_t + scan_step) / scan_step)) + 1;
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = saddle_objective(lo + i * scan_step, p, t, rho);

    double best_y = 0.0;
    double best_g = -INFINITY;
    double second_y = 0.0;
    double second_g = -INFINITY;
    for (int i = 1; i + 1 < n; ++i) {
        if (!(g[i] >= g[i - 1] && g[i] >= g[i + 1])) continue;
        const double y = refine_local_max(lo + (i - 1) * scan_step, lo + (i + 1) * scan_step, p, t, rho);
        const double gy = saddle_objective(y, p, t, rho);
        if (gy > best_g) {
            second_y = best_y;
            second_g = best_g;
            best_y = y;
            best_g = gy;
        } else if (gy > second_g) {
            second_y = y;
            second_g = gy;
        }
    }
    if (!std::isfinite(best_g)) {
        // Maximum sits at the grid edge; unreachable for |y*| <= sqrt t but kept as a guard.
        const int i = g.front() >= g.back() ? 0 : n - 1;
        return lo + i * scan_step;
    }
    if (std::isfinite(second_g) && best_g - second_g < 1e-12 && std::abs(best_y - second_y) > 1e-6) {
        emit_warning("saddle objective has degenerate twin maxima at p=" + std::to_string(p) +
                     ", t=" + std::to_string(t));
    }
    return best_y;
}

}  // namespace

double f_tilde(double p, double rho) {
    if (rho >= 1.0) return 1.0;
    if (rho <= 0.0) return -1.0;
    const auto [a, b] = log_weights(p, rho);
    const double m = std::max(a, b);
    const double ea = std::exp(a - m);
    const double eb = std::exp(b - m);
    return (ea - eb) / (ea + eb);
}

double t_tilde(double p, double rho) {
    if (rho >= 1.0 || rho <= 0.0) return 0.0;
    const auto [a, b] = log_weights(p, rho);
    return std::exp(std::log(4.0) + std::log(rho) + std::log1p(-rho) - 2.0 * log_sum_exp(a, b));
}

double log_partition(double y, double p, double t, double rho) {
    const double q = p + std::sqrt(t) * y;
    if (rho >= 1.0) return q;
    if (rho <= 0.0) return -q;
    const auto [a, b] = log_weights(q, rho);
    return log_sum_exp(a, b);
}

double saddle_objective(double y, double p, double t, double rho) {
    return -0.5 * y * y + log_partition(y, p, t, rho);
}

double solve_y_star(double p, double t, double rho) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("t must be finite and non-negative");
    if (!std::isfinite(p)) throw InvalidArgument("p must be finite");
    if (t == 0.0) return 0.0;
    const double sqrt_t = std::sqrt(t);
    if (rho >= 1.0) return sqrt_t;
    if (rho <= 0.0) return -sqrt_t;
    if (t <= 1.0) return safeguarded_newton(sqrt_t * f_tilde(p, rho), -sqrt_t, sqrt_t, p, t, rho);
    return solve_y_star_multimodal(p, t, rho);
}

double f_rmle(double p, double t, double rho) {
    const double y = solve_y_star(p, t, rho);
    return f_tilde(p + std::sqrt(t) * y, rho);
}

double t_rmle(double p, double t, double rho) {
    return evaluate_potential(EstimatorMode::Rmle, p, t, rho, true).t_val;
}

double gaussian_tail_q(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

PotentialEval evaluate_potential(EstimatorMode mode, double p, double t, double rho, bool with_t) {
    PotentialEval e;
    e.p = p;
    e.t = t;
    if (mode == EstimatorMode::Bayes) {
        e.f_val = f_tilde(p, rho);
        if (with_t) e.t_val = t_tilde(p, rho);
        e.g_val = log_partition(0.0, p, 0.0, rho);
        return e;
    }
    e.y_star = solve_y_star(p, t, rho);
    const double q = p + std::sqrt(t) * e.y_star;
    e.f_val = f_tilde(q, rho);
    e.g_val = saddle_objective(e.y_star, p, t, rho);
    if (with_t) {
        const double one_minus_f2 = t_tilde(q, rho);
        const double denom = 1.0 - t * one_minus_f2;
        if (denom <= singular_threshold) {
            throw SingularityError("RMLE response is singular at p=" + std::to_string(p) +
                                   ", t=" + std::to_string(t));
        }
        e.t_val = one_minus_f2 / denom;
    }
    return e;
}

void set_warning_handler(std::function<void(std::string_view)> handler) {
    std::lock_guard lock(warning_mutex);
    warning_handler = std::move(handler);
}

void emit_warning(std::string_view message) {
    std::lock_guard lock(warning_mutex);
    if (warning_handler) {
        warning_handler(message);
    } else if (!default_warned.exchange(true)) {
        std::cerr << "ssl-gmm-lab warning: " << message << " (further warnings suppressed)\n";
    }
}

}  // namespace sslgmm
