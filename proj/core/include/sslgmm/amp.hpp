#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sslgmm/dataset.hpp"
#include "sslgmm/params.hpp"
#include "sslgmm/state_evolution.hpp"

namespace sslgmm {

struct AmpInit {
    enum class Kind { Automatic, Zero, Supervised, Given, SmallRandom };
    Kind kind = Kind::Automatic;
    std::vector<double> w;     // Kind::Given
    std::uint64_t seed = 0;    // Kind::SmallRandom / Automatic without labels
    double scale = 1e-3;       // std of Kind::SmallRandom entries

    // Supervised when labels exist, small random otherwise.
    static AmpInit automatic(std::uint64_t seed = 0);
    static AmpInit zero();
    static AmpInit supervised();
    static AmpInit given(std::vector<double> w);
    static AmpInit small_random(std::uint64_t seed, double scale = 1e-3);
};

struct AmpOptions {
    double eps = 1e-8;
    int max_iter = 1000;
    double divergence_threshold = 1e6;
    AmpInit init;
    // Called after initialization (iteration 0) and after every step.
    std::function<void(int iteration, const std::vector<double>& w_hat, double rel_change)> observer;
};

struct AmpState {
    std::vector<double> w_hat;
    std::vector<double> p_tilde;   // cavity fields of unlabeled samples
    std::vector<double> f_cache;   // F(p_tilde) of the last step, used by the memory term
    double chi = 0.0;
    int iter = 0;
    bool converged = false;
    std::vector<double> rel_change_history;
};

// Pre-computed dataset quantities shared by every AMP/ABP step.
struct AmpWorkspace {
    std::vector<double> labeled_field;  // sum_mu y_mu x_mu
    std::vector<double> row_sq_norm;    // |x_nu|^2 for unlabeled rows
};

AmpWorkspace make_workspace(const Dataset& data);

// Initial estimate. Supervised: chi/(sigma2 sqrt N) sum_mu y_mu x_mu.
std::vector<double> initial_estimate(const Dataset& data, const ModelParams& params, double chi,
                                     const AmpInit& init, const AmpWorkspace& ws);

// One AMP iteration at fixed chi (estimator given by params.mode). The memory term is
// omitted on the first step (state.iter == 0). Throws DivergenceError on NaN or a
// relative change above the threshold.
void amp_step(AmpState& state, const Dataset& data, const ModelParams& params, const AmpWorkspace& ws,
              double divergence_threshold = 1e6);

// Iterates amp_step until the relative change drops below eps or max_iter is hit.
AmpState run_amp(const Dataset& data, const ModelParams& params, double chi, const AmpOptions& options = {});

// Full approximate belief propagation with edge-indexed messages (M_u x N).
struct AbpState {
    RowMatrix w_hat_edges;      // w_{i -> nu}
    RowMatrix p_tilde_edges;    // p_{nu -> i}
    std::vector<double> s_per_sample;  // chi |x_nu|^2 / (sigma2^2 N)
    std::vector<double> w_hat;  // marginal estimate
    double chi = 0.0;
    int iter = 0;
    bool converged = false;
    std::vector<double> rel_change_history;
};

struct AbpOptions {
    double eps = 1e-8;
    int max_iter = 1000;
    double divergence_threshold = 1e6;
    AmpInit init;
};

AbpState run_abp(const Dataset& data, const ModelParams& params, double chi, const AbpOptions& options = {});

// Mean over samples nu of the outgoing messages w_{i -> nu}.
std::vector<double> abp_message_average(const AbpState& state);

// k = w.w0 / |w0|^2, v = (1/N) sum_i (w_i - k w0_i)^2. Throws DegenerateInput when w0 = 0.
OrderParams order_params_from_state(const std::vector<double>& w_hat, const std::vector<double>& w0,
                                    double chi = 0.0, double lambda0 = 1.0);

double relative_change(const std::vector<double>& next, const std::vector<double>& prev);

}  // namespace sslgmm
