#include <benchmark/benchmark.h>

#include "amlpf/bench.hpp"
#include "amlpf/multilevel.hpp"
#include "amlpf/resample.hpp"
#include "amlpf/scheme.hpp"

using namespace amlpf;

namespace {

void BM_MilsteinUnit(benchmark::State& state) {
    const auto ssm = builtin_model("clark_cameron");
    const Level level(static_cast<int>(state.range(0)));
    RandomStream rng(1);
    for (auto _ : state) benchmark::DoNotOptimize(milstein_unit(*ssm.diffusion, level, ssm.x0, rng));
    state.SetItemsProcessed(state.iterations() * level.steps());
}
BENCHMARK(BM_MilsteinUnit)->DenseRange(3, 8, 5);

void BM_AntitheticTriple(benchmark::State& state) {
    const auto ssm = builtin_model("nlm");
    const Level level(static_cast<int>(state.range(0)));
    RandomStream rng(2);
    const CoupledTriple x0{ssm.x0, ssm.x0, ssm.x0};
    for (auto _ : state) benchmark::DoNotOptimize(antithetic_triple_unit(*ssm.diffusion, level, x0, rng));
    state.SetItemsProcessed(state.iterations() * level.steps());
}
BENCHMARK(BM_AntitheticTriple)->DenseRange(3, 8, 5);

void BM_TripleResample(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    RandomStream rng(3);
    auto draw = [&] {
        std::vector<double> lw(n);
        for (auto& x : lw) x = rng.gaussian();
        return WeightVector(std::move(lw));
    };
    const auto w1 = draw(), w2 = draw(), w3 = draw();
    for (auto _ : state) benchmark::DoNotOptimize(triple_coupled_resample(w1, w2, w3, rng));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TripleResample)->RangeMultiplier(10)->Range(100, 10000);

void BM_PfRun(benchmark::State& state) {
    const auto ssm = builtin_model("gbm");
    const auto data = simulate_data(ssm, 10, {}, 1);
    const auto phis = test_functions({"x1"});
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(pf_run(ssm, data.observations, Level(5), n, {}, phis, 1));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pf_cost(10, n, Level(5))));
}
BENCHMARK(BM_PfRun)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_AmlpfRun(benchmark::State& state) {
    const auto ssm = builtin_model("gbm");
    const auto data = simulate_data(ssm, 10, {}, 1);
    const auto phis = test_functions({"x1"});
    const auto cfg = make_ml_config(0.02, 2, 6);
    for (auto _ : state) benchmark::DoNotOptimize(amlpf_run(ssm, data.observations, cfg, {}, phis, 1));
}
BENCHMARK(BM_AmlpfRun)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
