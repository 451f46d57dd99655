#include <doctest.h>

#include <cmath>
#include <vector>

#include "sslgmm/amp.hpp"
#include "sslgmm/errors.hpp"
#include "sslgmm/metrics.hpp"
#include "sslgmm/potentials.hpp"
#include "sslgmm/rng.hpp"

using namespace sslgmm;

TEST_SUITE("metrics") {

TEST_CASE("mse from order parameters") {
    CHECK(mse_from_order_params(1.0, 0.0, 1.0) == 0.0);
    CHECK(mse_from_order_params(0.0, 0.0, 1.0) == 1.0);
    CHECK(mse_from_order_params(0.0, 0.0, 4.0) == 0.25);
    CHECK(mse_from_order_params(0.5, 0.2, 2.0) == doctest::Approx(0.125 + 0.2));
}

TEST_CASE("generalization error reference values") {
    ModelParams p;
    CHECK(ge_from_order_params(1.0, 0.0, p) == doctest::Approx(gaussian_tail_q(1.0)).epsilon(1e-14));
    CHECK(ge_from_order_params(1.0, 0.0, p) == doctest::Approx(0.15865525393145707).epsilon(1e-13));
    CHECK(ge_from_order_params(0.0, 1.0, p) == doctest::Approx(0.5));
    CHECK(ge_from_order_params(-1.0, 0.0, p) == doctest::Approx(1.0 - gaussian_tail_q(1.0)));
    CHECK_THROWS_AS(ge_from_order_params(0.0, 0.0, p), DegenerateInput);
    p.rho = 1.0;
    CHECK(ge_from_order_params(0.3, 0.5, p) == 0.0);
    p.rho = 0.0;
    CHECK(ge_from_order_params(0.3, 0.5, p) == 0.0);
}

TEST_CASE("balanced generalization error is monotone in the order parameters") {
    // With rho != 1/2 the fixed offset b breaks scale invariance and monotonicity in k.
    ModelParams p;
    double prev = 1.0;
    for (double k = 0.05; k <= 3.0; k += 0.05) {
        const double ge = ge_from_order_params(k, 0.3, p);
        CHECK(ge < prev);
        prev = ge;
    }
    prev = 0.0;
    for (double v = 0.05; v <= 3.0; v += 0.05) {
        const double ge = ge_from_order_params(0.8, v, p);
        CHECK(ge > prev);
        prev = ge;
    }
}

TEST_CASE("generalization error is invariant under rescaling the estimate when balanced") {
    ModelParams p;
    for (double c : {0.1, 2.0, 50.0}) {
        CHECK(ge_from_order_params(c * 0.7, c * c * 0.4, p) ==
              doctest::Approx(ge_from_order_params(0.7, 0.4, p)).epsilon(1e-13));
    }
}

TEST_CASE("decision offset") {
    ModelParams p;
    CHECK(decision_offset(p) == 0.0);
    p.rho = 0.75;
    p.sigma2 = 2.0;
    CHECK(decision_offset(p) == doctest::Approx(std::log(3.0)));
    p.rho = 1.0;
    CHECK(decision_offset(p) == INFINITY);
}

TEST_CASE("predict label") {
    ModelParams p;
    const std::vector<double> w{1.0, -1.0, 0.0, 0.0};
    CHECK(predict_label(w, std::vector<double>{2.0, 1.0, 0.0, 0.0}, p) == 1);
    CHECK(predict_label(w, std::vector<double>{1.0, 2.0, 0.0, 0.0}, p) == -1);
    CHECK(predict_label(w, std::vector<double>{1.0, 1.0, 0.0, 0.0}, p) == 1);
    p.rho = 0.0;
    CHECK(predict_label(w, std::vector<double>{100.0, 0.0, 0.0, 0.0}, p) == -1);
    CHECK_THROWS_AS(predict_label(w, std::vector<double>{1.0}, p), InvalidArgument);
}

TEST_CASE("generalization error matches Monte Carlo on a constructed estimate") {
    const int n = 400;
    const int m = 100000;
    for (double rho : {0.5, 0.3}) {
        ModelParams p;
        p.rho = rho;
        p.sigma2 = 0.8;
        p.lambda0 = 1.5;
        CounterRng rng(11, streams::user);
        std::vector<double> w0(n), w(n);
        for (auto& x : w0) x = rng.normal() / std::sqrt(p.lambda0);
        for (int i = 0; i < n; ++i) w[i] = 0.7 * w0[i] + 0.6 * rng.normal();
        // Order parameters measured on the actual vectors, with the finite-N teacher norm folded in.
        const auto op = order_params_from_state(w, w0);
        double w0_sq = 0.0;
        for (double x : w0) w0_sq += x * x;
        ModelParams eff = p;
        eff.lambda0 = n / w0_sq;
        const double expected = ge_from_order_params(op.k, op.v, eff);

        CounterRng draw(12, streams::user, 1);
        std::vector<double> x(n);
        int errors = 0;
        const double sq = std::sqrt(double(n));
        const double noise = std::sqrt(p.sigma2);
        for (int mu = 0; mu < m; ++mu) {
            const int y = draw.uniform() < rho ? 1 : -1;
            for (int i = 0; i < n; ++i) x[i] = y * w0[i] / sq + noise * draw.normal();
            errors += predict_label(w, x, p) != y;
        }
        const double observed = double(errors) / m;
        CHECK(std::abs(observed - expected) < 4.0 * std::sqrt(expected * (1.0 - expected) / m));
    }
}

TEST_CASE("error report bundles both metrics") {
    ModelParams p;
    const auto r = error_report(0.8, 0.1, p);
    CHECK(r.mse == doctest::Approx(mse_from_order_params(0.8, 0.1, 1.0)));
    CHECK(r.ge == doctest::Approx(ge_from_order_params(0.8, 0.1, p)));
    CHECK(r.k == 0.8);
    CHECK(r.v == 0.1);
    CHECK(r.b == 0.0);
}

}  // TEST_SUITE
