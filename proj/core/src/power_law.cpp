#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Core>
#include <unsupported/Eigen/NonLinearOptimization>

#include "sslgmm/errors.hpp"
#include "sslgmm/gd.hpp"
#include "sslgmm/rng.hpp"

namespace sslgmm {

namespace {

struct PowerLawResidual {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    std::vector<double> n;
    std::vector<double> y;

    int inputs() const { return 3; }
    int values() const { return int(n.size()); }

    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
        for (std::size_t j = 0; j < n.size(); ++j) r[j] = x[0] + x[1] * std::pow(n[j], -x[2]) - y[j];
        return 0;
    }

    int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
        for (std::size_t j = 0; j < n.size(); ++j) {
            const double p = std::pow(n[j], -x[2]);
            jac(j, 0) = 1.0;
            jac(j, 1) = p;
            jac(j, 2) = -x[1] * std::log(n[j]) * p;
        }
        return 0;
    }
};

struct MeanFit {
    double delta0;
    double a;
    double d;
    double residual;
    bool converged;
    bool degenerate;
};

MeanFit fit_means(const std::vector<double>& n_values, const std::vector<double>& means) {
    const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
    const double scale = std::max(std::abs(*lo), std::abs(*hi));
    if (*hi - *lo <= 1e-12 * std::max(scale, 1e-300)) {
        double m = 0.0;
        for (double v : means) m += v;
        return {m / means.size(), 0.0, NAN, 0.0, true, true};
    }

    PowerLawResidual functor{n_values, means};
    Eigen::VectorXd x(3);
    x << *lo, 1.0, 0.5;
    Eigen::LevenbergMarquardt<PowerLawResidual> lm(functor);
    lm.parameters.maxfev = 4000;
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-14;
    const auto status = lm.minimize(x);

    Eigen::VectorXd r(n_values.size());
    functor(x, r);
    MeanFit fit{x[0], x[1], x[2], r.squaredNorm(), false, false};
    using Status = Eigen::LevenbergMarquardtSpace::Status;
    const bool solver_ok = status == Status::RelativeReductionTooSmall || status == Status::RelativeErrorTooSmall ||
                           status == Status::RelativeErrorAndReductionTooSmall || status == Status::CosinusTooSmall ||
                           status == Status::FtolTooSmall || status == Status::XtolTooSmall;
    fit.converged = solver_ok && x.allFinite();
    fit.degenerate = std::abs(x[1]) * std::pow(n_values.front(), -x[2]) <= 1e-12 * std::max(scale, 1e-300);
    return fit;
}

void summarize(const DeltaSamples& samples, std::vector<int>& ns, std::vector<double>& means,
               std::vector<double>* errors) {
    for (const auto& [n, vals] : samples) {
        if (vals.empty()) throw InvalidArgument("empty sample set for N=" + std::to_string(n));
        ns.push_back(n);
        double m = 0.0;
        for (double v : vals) m += v;
        m /= vals.size();
        means.push_back(m);
        if (errors) {
            double s = 0.0;
            for (double v : vals) s += (v - m) * (v - m);
            const double sd = vals.size() > 1 ? std::sqrt(s / (vals.size() - 1)) : 0.0;
            errors->push_back(sd / std::sqrt(double(vals.size())));
        }
    }
}

}  // namespace

ScalingFit fit_power_law(const DeltaSamples& samples) {
    if (samples.size() < 3) throw InvalidArgument("power-law fit needs at least three distinct N");
    ScalingFit out;
    summarize(samples, out.n_values, out.means, &out.std_errors);
    std::vector<double> nd(out.n_values.begin(), out.n_values.end());
    const auto f = fit_means(nd, out.means);
    out.delta0 = f.delta0;
    out.a = f.a;
    out.d = f.d;
    out.residual = f.residual;
    out.converged = f.converged;
    out.degenerate = f.degenerate;
    if (!f.converged) throw ConvergenceError("power-law fit did not converge", f.residual);
    return out;
}

BootstrapResult bootstrap_delta0(const DeltaSamples& samples, int n_boot, std::uint64_t seed) {
    if (n_boot < 100) throw InvalidArgument("bootstrap needs at least 100 resamples");
    if (samples.size() < 3) throw InvalidArgument("power-law fit needs at least three distinct N");
    BootstrapResult out;
    out.delta0.reserve(n_boot);
    for (int b = 0; b < n_boot; ++b) {
        CounterRng rng(seed, streams::bootstrap, std::uint64_t(b));
        DeltaSamples resampled;
        for (const auto& [n, vals] : samples) {
            std::uniform_int_distribution<std::size_t> pick(0, vals.size() - 1);
            auto& dst = resampled[n];
            dst.reserve(vals.size());
            for (std::size_t i = 0; i < vals.size(); ++i) dst.push_back(vals[pick(rng)]);
        }
        std::vector<int> ns;
        std::vector<double> means;
        summarize(resampled, ns, means, nullptr);
        const auto f = fit_means(std::vector<double>(ns.begin(), ns.end()), means);
        if (f.converged && std::isfinite(f.delta0)) {
            out.delta0.push_back(f.delta0);
        } else {
            ++out.failures;
        }
    }
    return out;
}

double log_log_slope(const DeltaSamples& samples) {
    std::vector<int> ns;
    std::vector<double> means;
    summarize(samples, ns, means, nullptr);
    if (ns.size() < 2) throw InvalidArgument("slope needs at least two N");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = double(ns.size());
    for (std::size_t j = 0; j < ns.size(); ++j) {
        const double x = std::log(double(ns[j]));
        const double y = std::log(means[j]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace sslgmm
