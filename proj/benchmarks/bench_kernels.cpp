#include <benchmark/benchmark.h>

#include <vector>

#include "sslgmm/amp.hpp"
#include "sslgmm/dataset.hpp"
#include "sslgmm/gd.hpp"
#include "sslgmm/potentials.hpp"
#include "sslgmm/state_evolution.hpp"

using namespace sslgmm;

namespace {

ModelParams model(EstimatorMode mode, int n) {
    ModelParams p;
    p.mode = mode;
    p.n_dim = n;
    p.alpha_l = 0.5;
    p.alpha_u = 2.5;
    p.rho = 0.4;
    p.lambda = 2.0;
    return p;
}

void BM_RmlePotential(benchmark::State& state) {
    const double t = double(state.range(0)) / 100.0;
    double p = -3.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(evaluate_potential(EstimatorMode::Rmle, p, t, 0.4, true));
        p = p > 3.0 ? -3.0 : p + 0.001;
    }
}
BENCHMARK(BM_RmlePotential)->Arg(30)->Arg(90)->Arg(150);

void BM_SeStep(benchmark::State& state) {
    const auto mode = state.range(0) ? EstimatorMode::Rmle : EstimatorMode::Bayes;
    const auto p = model(mode, 1000);
    const double chi = double(state.range(1)) / 100.0;
    const auto op = make_order_params(chi, 0.6, 0.3, p.lambda0);
    for (auto _ : state) benchmark::DoNotOptimize(se_step(op, p, chi));
}
BENCHMARK(BM_SeStep)->Args({1, 30})->Args({1, 95})->Args({0, 30});

void BM_AmpStep(benchmark::State& state) {
    const auto p = model(EstimatorMode::Rmle, int(state.range(0)));
    const auto data = generate_dataset(p, 1);
    const auto ws = make_workspace(data);
    AmpOptions o;
    o.max_iter = 1;
    const auto start = run_amp(data, p, 0.3, o);
    for (auto _ : state) {
        AmpState s = start;
        amp_step(s, data, p, ws);
        benchmark::DoNotOptimize(s.w_hat.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AmpStep)->Arg(500)->Arg(1000)->Arg(2000)->Complexity(benchmark::oNSquared);

void BM_GdGradient(benchmark::State& state) {
    const auto p = model(EstimatorMode::Rmle, int(state.range(0)));
    const auto data = generate_dataset(p, 2);
    std::vector<double> w(data.w0);
    for (auto _ : state) benchmark::DoNotOptimize(objective_and_gradient(w, data, p));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GdGradient)->Arg(500)->Arg(1000)->Arg(2000)->Complexity(benchmark::oNSquared);

}  // namespace

BENCHMARK_MAIN();
