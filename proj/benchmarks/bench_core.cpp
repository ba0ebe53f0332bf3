#include <benchmark/benchmark.h>

#include "csdelay/cs_model.hpp"
#include "csdelay/feedback_lab.hpp"
#include "csdelay/simulation.hpp"

using namespace csdelay;

static void BM_CsRhs(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const EnsembleState s = random_cloud(n, 2, 1.0, 1.0, 7);
    const ModelParams params{1.0, 0.05, Kernel::cucker_smale(0.3)};
    for (auto _ : state) {
        EnsembleState out = cs_rhs(0.0, s, s, params);
        benchmark::DoNotOptimize(out.v.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CsRhs)->RangeMultiplier(2)->Range(8, 256)->Complexity(benchmark::oNSquared);

static void BM_SimulateEnsemble(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const InitialDatum datum = constant_datum(random_cloud(n, 2, 1.0, 1.0, 7));
    const ModelParams params{1.0, 0.05, Kernel::cucker_smale(0.3)};
    SimulationOptions opt;
    opt.m = 20;
    opt.t_end = 1.0;
    for (auto _ : state) {
        SimulationRun run = simulate_ensemble(datum, params, opt);
        benchmark::DoNotOptimize(run.series.V.back());
    }
}
BENCHMARK(BM_SimulateEnsemble)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

static void BM_ExactFeedback(benchmark::State& state) {
    const FeedbackProblem p{0.5, 1.0, 1.0, static_cast<double>(state.range(0))};
    for (auto _ : state) {
        FeedbackSolution sol = exact_solve(p);
        benchmark::DoNotOptimize(sol(p.t_end));
    }
}
BENCHMARK(BM_ExactFeedback)->Arg(50)->Arg(200)->Arg(700);

static void BM_FirstSignChange(benchmark::State& state) {
    const FeedbackProblem p{0.5, 1.0, 1.0, 200.0};
    const FeedbackSolution sol = exact_solve(p);
    for (auto _ : state) {
        benchmark::DoNotOptimize(first_sign_change(sol));
    }
}
BENCHMARK(BM_FirstSignChange);

BENCHMARK_MAIN();
