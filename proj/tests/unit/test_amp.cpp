#include <doctest.h>

#include <cmath>
#include <numeric>

#include "sslgmm/amp.hpp"
#include "sslgmm/dataset.hpp"
#include "sslgmm/errors.hpp"
#include "sslgmm/rng.hpp"

using namespace sslgmm;

namespace {

ModelParams small_model(double alpha_l, double alpha_u, int n = 200) {
    ModelParams p;
    p.n_dim = n;
    p.alpha_l = alpha_l;
    p.alpha_u = alpha_u;
    return p;
}

double rel_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0, s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += (a[i] - b[i]) * (a[i] - b[i]);
        s += b[i] * b[i];
    }
    return std::sqrt(d / s);
}

}  // namespace

TEST_SUITE("amp") {

TEST_CASE("chi stays at the value it was given") {
    const auto p = small_model(0.5, 2.0);
    const auto d = generate_dataset(p, 1);
    AmpOptions o;
    o.max_iter = 5;
    o.eps = 1e-300;
    const auto s = run_amp(d, p, 0.37, o);
    CHECK(s.chi == 0.37);
    CHECK(s.iter == 5);
    CHECK(s.rel_change_history.size() == 5);
}

TEST_CASE("labeled-only AMP is the supervised estimate") {
    const auto p = small_model(1.5, 0.0);
    const auto d = generate_dataset(p, 2);
    const double chi = 0.4;
    const auto s = run_amp(d, p, chi);
    CHECK(s.converged);
    CHECK(s.iter == 1);
    const double c = chi / (p.sigma2 * std::sqrt(double(p.n_dim)));
    for (int i = 0; i < p.n_dim; ++i) {
        double h = 0.0;
        for (int mu = 0; mu < d.x_labeled.rows(); ++mu) h += d.y_labeled[mu] * d.x_labeled(mu, i);
        CHECK(s.w_hat[i] == doctest::Approx(c * h).epsilon(1e-12));
    }
}

TEST_CASE("zero estimate is a fixed point of the balanced unlabeled iteration") {
    for (auto mode : {EstimatorMode::Rmle, EstimatorMode::Bayes}) {
        auto p = small_model(0.0, 3.0);
        p.mode = mode;
        const auto d = generate_dataset(p, 3);
        AmpOptions o;
        o.init = AmpInit::zero();
        const auto s = run_amp(d, p, 0.3, o);
        CHECK(s.converged);
        for (double w : s.w_hat) CHECK(w == 0.0);
    }
}

TEST_CASE("mirror symmetry of the balanced unlabeled iteration") {
    const auto p = small_model(0.0, 3.0);
    const auto d = generate_dataset(p, 4);
    CounterRng rng(4, streams::user);
    std::vector<double> w(p.n_dim);
    for (auto& x : w) x = rng.normal();
    std::vector<double> minus_w(w);
    for (auto& x : minus_w) x = -x;
    AmpOptions a, b;
    a.max_iter = b.max_iter = 8;
    a.eps = b.eps = 1e-300;
    a.init = AmpInit::given(w);
    b.init = AmpInit::given(minus_w);
    const auto sa = run_amp(d, p, 0.3, a);
    const auto sb = run_amp(d, p, 0.3, b);
    for (int i = 0; i < p.n_dim; ++i) CHECK(sb.w_hat[i] == doctest::Approx(-sa.w_hat[i]).epsilon(1e-10));
}

TEST_CASE("zero iterations return the initial estimate") {
    const auto p = small_model(0.5, 1.0);
    const auto d = generate_dataset(p, 5);
    AmpOptions o;
    o.max_iter = 0;
    int calls = 0;
    o.observer = [&](int it, const std::vector<double>&, double) {
        CHECK(it == 0);
        ++calls;
    };
    const auto s = run_amp(d, p, 0.3, o);
    CHECK(calls == 1);
    CHECK(s.iter == 0);
    CHECK(!s.converged);
    const auto ws = make_workspace(d);
    CHECK(s.w_hat == initial_estimate(d, p, 0.3, AmpInit::supervised(), ws));
}

TEST_CASE("automatic init falls back to small random without labels") {
    const auto p = small_model(0.0, 1.0);
    const auto d = generate_dataset(p, 6);
    const auto ws = make_workspace(d);
    const auto w = initial_estimate(d, p, 0.3, AmpInit::automatic(9), ws);
    CHECK(w == initial_estimate(d, p, 0.3, AmpInit::small_random(9), ws));
    const double rms = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0) / w.size());
    CHECK(rms == doctest::Approx(1e-3).epsilon(0.2));
    CHECK_THROWS_AS(initial_estimate(d, p, 0.3, AmpInit::given({1.0, 2.0}), ws), InvalidArgument);
}

TEST_CASE("order parameters of a constructed estimate") {
    const std::vector<double> w0{1.0, -2.0, 2.0, 0.0};
    std::vector<double> w{0.5, -1.0, 1.0, 0.0};
    auto op = order_params_from_state(w, w0);
    CHECK(op.k == doctest::Approx(0.5));
    CHECK(std::abs(op.v) < 1e-15);
    w[3] = 2.0;
    op = order_params_from_state(w, w0, 0.1, 2.0);
    CHECK(op.k == doctest::Approx(0.5));
    CHECK(op.v == doctest::Approx(1.0));
    CHECK(op.v_tilde == doctest::Approx(0.125 + 1.0));
    CHECK_THROWS_AS(order_params_from_state(w, std::vector<double>(4, 0.0)), DegenerateInput);
}

TEST_CASE("relative change") {
    CHECK(relative_change({1.0, 0.0}, {1.0, 0.0}) == 0.0);
    CHECK(relative_change({0.0, 0.0}, {0.0, 0.0}) == 0.0);
    CHECK(relative_change({3.0, 4.0}, {0.0, 0.0}) == doctest::Approx(1.0));
}

TEST_CASE("edge-indexed belief propagation agrees with AMP") {
    for (auto mode : {EstimatorMode::Rmle, EstimatorMode::Bayes}) {
        auto p = small_model(0.5, 2.0, 400);
        p.mode = mode;
        const auto d = generate_dataset(p, 7);
        AmpOptions ao;
        ao.eps = 1e-10;
        AbpOptions bo;
        bo.eps = 1e-10;
        const auto amp = run_amp(d, p, 0.3, ao);
        const auto abp = run_abp(d, p, 0.3, bo);
        REQUIRE(amp.converged);
        REQUIRE(abp.converged);
        CHECK(rel_distance(abp.w_hat, amp.w_hat) < 5.0 / std::sqrt(double(p.n_dim)));
        CHECK(rel_distance(abp_message_average(abp), amp.w_hat) < 5.0 / std::sqrt(double(p.n_dim)));
    }
}

TEST_CASE("invalid chi and dimension mismatch are rejected") {
    const auto p = small_model(0.5, 1.0);
    const auto d = generate_dataset(p, 8);
    CHECK_THROWS_AS(run_amp(d, p, 0.0), InvalidArgument);
    CHECK_THROWS_AS(run_amp(d, p, -1.0), InvalidArgument);
    AmpState s;
    s.chi = 0.3;
    CHECK_THROWS_AS(amp_step(s, d, p, make_workspace(d)), InvalidArgument);
}

}  // TEST_SUITE
