#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "sslgmm/dataset.hpp"
#include "sslgmm/errors.hpp"
#include "sslgmm/gd.hpp"
#include "sslgmm/rng.hpp"

using namespace sslgmm;

namespace {

ModelParams gd_model(double alpha_l, double alpha_u, double rho = 0.5) {
    ModelParams p;
    p.n_dim = 60;
    p.alpha_l = alpha_l;
    p.alpha_u = alpha_u;
    p.rho = rho;
    p.sigma2 = 0.9;
    p.lambda = 1.7;
    return p;
}

// Direct evaluation of the negative log posterior from the squared distances.
double direct_objective(const std::vector<double>& w, const Dataset& d, const ModelParams& p) {
    const int n = d.n_dim;
    const double sq = std::sqrt(double(n));
    double obj = 0.0;
    for (int mu = 0; mu < d.x_labeled.rows(); ++mu) {
        double r = 0.0;
        for (int i = 0; i < n; ++i) r += std::pow(d.x_labeled(mu, i) - d.y_labeled[mu] * w[i] / sq, 2);
        obj += r / (2.0 * p.sigma2);
    }
    for (int nu = 0; nu < d.x_unlabeled.rows(); ++nu) {
        double plus = 0.0, minus = 0.0;
        for (int i = 0; i < n; ++i) {
            plus += std::pow(d.x_unlabeled(nu, i) - w[i] / sq, 2);
            minus += std::pow(d.x_unlabeled(nu, i) + w[i] / sq, 2);
        }
        obj -= std::log(p.rho * std::exp(-plus / (2.0 * p.sigma2)) +
                        (1.0 - p.rho) * std::exp(-minus / (2.0 * p.sigma2)));
    }
    for (double x : w) obj += 0.5 * p.lambda * x * x;
    return obj;
}

std::vector<double> random_vector(int n, std::uint64_t seed, double scale) {
    CounterRng rng(seed, streams::user);
    std::vector<double> w(n);
    for (auto& x : w) x = scale * rng.normal();
    return w;
}

}  // namespace

TEST_SUITE("gd") {

TEST_CASE("objective matches the direct formula") {
    for (double rho : {0.5, 0.3}) {
        const auto p = gd_model(0.5, 1.0, rho);
        const auto d = generate_dataset(p, 1);
        const auto w = random_vector(p.n_dim, 2, 0.8);
        CHECK(objective_and_gradient(w, d, p).objective == doctest::Approx(direct_objective(w, d, p)).epsilon(1e-10));
    }
}

TEST_CASE("gradient matches central differences") {
    const auto p = gd_model(0.5, 2.0, 0.35);
    const auto d = generate_dataset(p, 3);
    auto w = random_vector(p.n_dim, 4, 1.0);
    const auto g = objective_and_gradient(w, d, p).gradient;
    const double h = 1e-5;
    for (int i = 0; i < p.n_dim; i += 7) {
        const double keep = w[i];
        w[i] = keep + h;
        const double up = objective_and_gradient(w, d, p).objective;
        w[i] = keep - h;
        const double down = objective_and_gradient(w, d, p).objective;
        w[i] = keep;
        CHECK(g[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("prior alone gives lambda w") {
    auto p = gd_model(0.0, 0.0);
    p.alpha_l = 0.0;
    const auto d = generate_dataset(p, 5);
    const auto w = random_vector(p.n_dim, 6, 1.0);
    const auto og = objective_and_gradient(w, d, p);
    for (int i = 0; i < p.n_dim; ++i) CHECK(og.gradient[i] == doctest::Approx(p.lambda * w[i]).epsilon(1e-14));
    const double sq = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
    CHECK(og.objective == doctest::Approx(0.5 * p.lambda * sq).epsilon(1e-14));
}

TEST_CASE("labeled-only descent reaches the ridge solution") {
    const auto p = gd_model(2.0, 0.0);
    const auto d = generate_dataset(p, 7);
    GdConfig cfg;
    cfg.lambda = p.lambda;
    cfg.eta = 0.2;
    cfg.eps_gd = 1e-13;
    const auto r = run_gd(d, cfg, p);
    REQUIRE(r.converged);
    const int n = p.n_dim;
    const double m_l = d.x_labeled.rows();
    const double denom = p.lambda + m_l / (n * p.sigma2);
    for (int i = 0; i < n; ++i) {
        double h = 0.0;
        for (int mu = 0; mu < d.x_labeled.rows(); ++mu) h += d.y_labeled[mu] * d.x_labeled(mu, i);
        CHECK(r.w[i] == doctest::Approx(h / (p.sigma2 * std::sqrt(double(n))) / denom).epsilon(1e-9));
    }
}

TEST_CASE("small steps decrease the objective monotonically") {
    const auto p = gd_model(0.5, 3.0, 0.4);
    const auto d = generate_dataset(p, 8);
    GdConfig cfg;
    cfg.lambda = 1.0;
    cfg.eta = 0.05;
    cfg.eps_gd = 1e-9;
    std::vector<double> objectives;
    std::vector<int> iters;
    const auto r = run_gd(d, cfg, p, {}, [&](int it, const std::vector<double>&, double obj) {
        iters.push_back(it);
        objectives.push_back(obj);
    });
    CHECK(r.converged);
    REQUIRE(objectives.size() == std::size_t(r.iterations) + 1);
    CHECK(iters.front() == 0);
    CHECK(iters.back() == r.iterations);
    for (std::size_t i = 1; i < objectives.size(); ++i) CHECK(objectives[i] <= objectives[i - 1] * (1.0 + 1e-14));
    CHECK(objectives.back() == doctest::Approx(r.objective).epsilon(1e-9));
    ModelParams q = p;
    q.lambda = cfg.lambda;
    const auto g = objective_and_gradient(r.w, d, q).gradient;
    const double gn = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
    const double wn = std::sqrt(std::inner_product(r.w.begin(), r.w.end(), r.w.begin(), 0.0));
    CHECK(cfg.eta * gn / wn < 1e-8);
}

TEST_CASE("oversized steps raise a divergence error") {
    const auto p = gd_model(2.0, 2.0);
    const auto d = generate_dataset(p, 9);
    GdConfig cfg;
    cfg.eta = 50.0;
    CHECK_THROWS_AS(run_gd(d, cfg, p), DivergenceError);
}

TEST_CASE("configuration validation") {
    GdConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.eta = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.eps_gd = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    const auto p = gd_model(0.5, 0.5);
    const auto d = generate_dataset(p, 10);
    CHECK_THROWS_AS(run_gd(d, GdConfig{}, p, std::vector<double>(3, 0.0)), InvalidArgument);
}

TEST_CASE("relative distance between estimates") {
    CHECK(delta_gd_amp({3.0, 4.0}, {3.0, 4.0}) == 0.0);
    CHECK(delta_gd_amp({3.0, 4.0}, {0.0, 0.0}) == doctest::Approx(1.0));
    CHECK(delta_gd_amp({1.0, 0.0}, {1.0, 0.5}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(delta_gd_amp({0.0, 0.0}, {1.0, 0.0}), DegenerateInput);
    CHECK_THROWS_AS(delta_gd_amp({1.0}, {1.0, 0.0}), InvalidArgument);
}

}  // TEST_SUITE
