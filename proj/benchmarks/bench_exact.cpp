#include <benchmark/benchmark.h>

#include "mprtree/exact.hpp"

using namespace mprtree;

static void BM_CriTableBuild(benchmark::State& state) {
    const auto n = state.range(0);
    for (auto _ : state) {
        CriTable table(ChannelConfig::fair(2));
        table.ensure(n);
        benchmark::DoNotOptimize(table.length(n));
    }
    state.SetComplexityN(n);
}
BENCHMARK(BM_CriTableBuild)->Range(1 << 8, 1 << 14)->Complexity();

static void BM_ClosedForm(benchmark::State& state) {
    const auto cfg = ChannelConfig::fair(4);
    const auto n = state.range(0);
    for (auto _ : state) benchmark::DoNotOptimize(expected_cri_closed_form(n, cfg));
}
BENCHMARK(BM_ClosedForm)->Arg(30)->Arg(100)->Arg(300);

static void BM_CoefficientPath(benchmark::State& state) {
    const auto cfg = ChannelConfig::fair(4);
    const auto n = state.range(0);
    for (auto _ : state) benchmark::DoNotOptimize(expected_cri_from_series(n, cfg));
}
BENCHMARK(BM_CoefficientPath)->Arg(30)->Arg(100)->Arg(300);
