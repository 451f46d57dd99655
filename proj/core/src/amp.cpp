#include "sslgmm/amp.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "sslgmm/errors.hpp"
#include "sslgmm/potentials.hpp"
#include "sslgmm/rng.hpp"

namespace sslgmm {

namespace {

double norm2(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

void check_finite(const std::vector<double>& a, const char* what, int iteration) {
    for (double x : a) {
        if (!std::isfinite(x)) throw DivergenceError(std::string(what) + " became non-finite", iteration);
    }
}

void check_chi(double chi) {
    if (!(chi > 0.0) || !std::isfinite(chi)) throw InvalidArgument("chi must be positive and finite");
}

void record_change(std::vector<double>& history, double rel, double threshold, int iteration) {
    history.push_back(rel);
    if (!std::isfinite(rel) || rel > threshold) {
        throw DivergenceError("relative change " + std::to_string(rel) + " exceeds divergence threshold", iteration);
    }
}

}  // namespace

AmpInit AmpInit::automatic(std::uint64_t seed) {
    AmpInit i;
    i.kind = Kind::Automatic;
    i.seed = seed;
    return i;
}

AmpInit AmpInit::zero() {
    AmpInit i;
    i.kind = Kind::Zero;
    return i;
}

AmpInit AmpInit::supervised() {
    AmpInit i;
    i.kind = Kind::Supervised;
    return i;
}

AmpInit AmpInit::given(std::vector<double> w) {
    AmpInit i;
    i.kind = Kind::Given;
    i.w = std::move(w);
    return i;
}

AmpInit AmpInit::small_random(std::uint64_t seed, double scale) {
    AmpInit i;
    i.kind = Kind::SmallRandom;
    i.seed = seed;
    i.scale = scale;
    return i;
}

AmpWorkspace make_workspace(const Dataset& data) {
    AmpWorkspace ws;
    const int n = data.n_dim;
    ws.labeled_field.assign(n, 0.0);
    for (int mu = 0; mu < data.x_labeled.rows(); ++mu) {
        const auto row = data.x_labeled.row(mu);
        const double y = data.y_labeled[mu];
        for (int i = 0; i < n; ++i) ws.labeled_field[i] += y * row[i];
    }
    ws.row_sq_norm.resize(data.x_unlabeled.rows());
    for (int nu = 0; nu < data.x_unlabeled.rows(); ++nu) {
        const auto row = data.x_unlabeled.row(nu);
        ws.row_sq_norm[nu] = std::inner_product(row.begin(), row.end(), row.begin(), 0.0);
    }
    return ws;
}

std::vector<double> initial_estimate(const Dataset& data, const ModelParams& params, double chi,
                                     const AmpInit& init, const AmpWorkspace& ws) {
    const int n = data.n_dim;
    auto kind = init.kind;
    if (kind == AmpInit::Kind::Automatic) {
        kind = data.x_labeled.rows() > 0 ? AmpInit::Kind::Supervised : AmpInit::Kind::SmallRandom;
    }
    std::vector<double> w(n, 0.0);
    switch (kind) {
        case AmpInit::Kind::Zero:
            break;
        case AmpInit::Kind::Supervised: {
            const double c = chi / (params.sigma2 * std::sqrt(double(n)));
            for (int i = 0; i < n; ++i) w[i] = c * ws.labeled_field[i];
            break;
        }
        case AmpInit::Kind::Given:
            if (int(init.w.size()) != n) throw InvalidArgument("given initial estimate has wrong length");
            w = init.w;
            break;
        case AmpInit::Kind::SmallRandom: {
            CounterRng rng(init.seed, streams::amp_init);
            for (auto& x : w) x = init.scale * rng.normal();
            break;
        }
        case AmpInit::Kind::Automatic:
            break;
    }
    return w;
}

double relative_change(const std::vector<double>& next, const std::vector<double>& prev) {
    double diff = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) diff += (next[i] - prev[i]) * (next[i] - prev[i]);
    diff = std::sqrt(diff);
    if (diff == 0.0) return 0.0;
    const double scale = std::max(norm2(next), norm2(prev));
    return diff / scale;
}

void amp_step(AmpState& state, const Dataset& data, const ModelParams& params, const AmpWorkspace& ws,
              double divergence_threshold) {
    const int n = data.n_dim;
    const int m_u = data.x_unlabeled.rows();
    if (int(state.w_hat.size()) != n || int(state.p_tilde.size()) != m_u) {
        throw InvalidArgument("AMP state dimensions do not match the dataset");
    }
    const double chi = state.chi;
    const double s2 = params.sigma2;
    const double t = chi / s2;
    const double c = 1.0 / (s2 * std::sqrt(double(n)));
    const double memory_scale = chi / (s2 * s2 * n);
    const bool with_memory = state.iter > 0;

    std::vector<double> f(m_u), tv(m_u);
    for (int nu = 0; nu < m_u; ++nu) {
        const auto row = data.x_unlabeled.row(nu);
        double p = c * std::inner_product(row.begin(), row.end(), state.w_hat.begin(), 0.0);
        if (with_memory) p -= memory_scale * ws.row_sq_norm[nu] * state.f_cache[nu];
        if (!std::isfinite(p)) throw DivergenceError("AMP field became non-finite", state.iter + 1);
        const auto e = evaluate_potential(params.mode, p, t, params.rho, true);
        state.p_tilde[nu] = p;
        f[nu] = e.f_val;
        tv[nu] = e.t_val;
    }

    std::vector<double> acc = ws.labeled_field;
    std::vector<double> onsager(n, 0.0);
    for (int nu = 0; nu < m_u; ++nu) {
        const auto row = data.x_unlabeled.row(nu);
        const double fn = f[nu];
        const double tn = tv[nu];
        for (int i = 0; i < n; ++i) {
            acc[i] += row[i] * fn;
            onsager[i] += row[i] * row[i] * tn;
        }
    }

    std::vector<double> next(n);
    for (int i = 0; i < n; ++i) next[i] = chi * c * (acc[i] - state.w_hat[i] * c * onsager[i]);

    ++state.iter;
    check_finite(next, "AMP estimate", state.iter);
    const double rel = relative_change(next, state.w_hat);
    state.w_hat = std::move(next);
    state.f_cache = std::move(f);
    record_change(state.rel_change_history, rel, divergence_threshold, state.iter);
}

AmpState run_amp(const Dataset& data, const ModelParams& params, double chi, const AmpOptions& options) {
    check_chi(chi);
    if (!(options.eps > 0.0)) throw InvalidArgument("eps must be positive");
    const AmpWorkspace ws = make_workspace(data);
    AmpState state;
    state.chi = chi;
    state.w_hat = initial_estimate(data, params, chi, options.init, ws);
    state.p_tilde.assign(data.x_unlabeled.rows(), 0.0);
    const double f0 = evaluate_potential(params.mode, 0.0, chi / params.sigma2, params.rho, false).f_val;
    state.f_cache.assign(data.x_unlabeled.rows(), f0);
    if (options.observer) options.observer(0, state.w_hat, NAN);

    for (int it = 0; it < options.max_iter; ++it) {
        amp_step(state, data, params, ws, options.divergence_threshold);
        const double rel = state.rel_change_history.back();
        if (options.observer) options.observer(state.iter, state.w_hat, rel);
        if (rel < options.eps) {
            state.converged = true;
            break;
        }
    }
    return state;
}

AbpState run_abp(const Dataset& data, const ModelParams& params, double chi, const AbpOptions& options) {
    check_chi(chi);
    if (!(options.eps > 0.0)) throw InvalidArgument("eps must be positive");
    const int n = data.n_dim;
    const int m_u = data.x_unlabeled.rows();
    const double s2 = params.sigma2;
    const double c = 1.0 / (s2 * std::sqrt(double(n)));
    const double pre = chi * c;
    const AmpWorkspace ws = make_workspace(data);

    AbpState st;
    st.chi = chi;
    st.w_hat = initial_estimate(data, params, chi, options.init, ws);
    st.w_hat_edges = RowMatrix(m_u, n);
    st.p_tilde_edges = RowMatrix(m_u, n);
    st.s_per_sample.resize(m_u);
    for (int nu = 0; nu < m_u; ++nu) {
        st.s_per_sample[nu] = chi * ws.row_sq_norm[nu] / (s2 * s2 * n);
        auto row = st.w_hat_edges.row(nu);
        std::copy(st.w_hat.begin(), st.w_hat.end(), row.begin());
    }

    RowMatrix f_edges(m_u, n);
    for (int it = 0; it < options.max_iter; ++it) {
        std::vector<double> h = ws.labeled_field;
        for (int nu = 0; nu < m_u; ++nu) {
            const auto x = data.x_unlabeled.row(nu);
            const auto w = st.w_hat_edges.row(nu);
            auto p = st.p_tilde_edges.row(nu);
            auto f = f_edges.row(nu);
            const double full = c * std::inner_product(x.begin(), x.end(), w.begin(), 0.0);
            const double s = st.s_per_sample[nu];
            for (int i = 0; i < n; ++i) {
                p[i] = full - c * x[i] * w[i];
                if (!std::isfinite(p[i])) throw DivergenceError("ABP field became non-finite", it + 1);
                f[i] = evaluate_potential(params.mode, p[i], s, params.rho, false).f_val;
                h[i] += x[i] * f[i];
            }
        }
        for (int nu = 0; nu < m_u; ++nu) {
            const auto x = data.x_unlabeled.row(nu);
            const auto f = f_edges.row(nu);
            auto w = st.w_hat_edges.row(nu);
            for (int i = 0; i < n; ++i) w[i] = pre * (h[i] - x[i] * f[i]);
        }
        std::vector<double> next(n);
        for (int i = 0; i < n; ++i) next[i] = pre * h[i];

        ++st.iter;
        check_finite(next, "ABP estimate", st.iter);
        const double rel = relative_change(next, st.w_hat);
        st.w_hat = std::move(next);
        record_change(st.rel_change_history, rel, options.divergence_threshold, st.iter);
        if (rel < options.eps) {
            st.converged = true;
            break;
        }
    }
    return st;
}

std::vector<double> abp_message_average(const AbpState& state) {
    const int m = state.w_hat_edges.rows();
    const int n = state.w_hat_edges.cols();
    if (m == 0) return state.w_hat;
    std::vector<double> avg(n, 0.0);
    for (int nu = 0; nu < m; ++nu) {
        const auto row = state.w_hat_edges.row(nu);
        for (int i = 0; i < n; ++i) avg[i] += row[i];
    }
    for (auto& a : avg) a /= m;
    return avg;
}

OrderParams order_params_from_state(const std::vector<double>& w_hat, const std::vector<double>& w0, double chi,
                                    double lambda0) {
    if (w_hat.size() != w0.size()) throw InvalidArgument("estimate and teacher lengths differ");
    const double w0_sq = std::inner_product(w0.begin(), w0.end(), w0.begin(), 0.0);
    if (!(w0_sq > 0.0)) throw DegenerateInput("teacher weights have zero norm");
    const double k = std::inner_product(w_hat.begin(), w_hat.end(), w0.begin(), 0.0) / w0_sq;
    double v = 0.0;
    for (std::size_t i = 0; i < w0.size(); ++i) {
        const double r = w_hat[i] - k * w0[i];
        v += r * r;
    }
    v /= double(w0.size());
    return make_order_params(chi, k, v, lambda0);
}

}  // namespace sslgmm
