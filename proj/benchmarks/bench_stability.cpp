#include <benchmark/benchmark.h>

#include "mprtree/stability.hpp"

using namespace mprtree;

static void BM_LinearBounds(benchmark::State& state) {
    CriTable table(ChannelConfig::fair(int(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(linear_bounds(50, table, 200000));
}
BENCHMARK(BM_LinearBounds)->Arg(1)->Arg(16);

static void BM_PoissonMixture(benchmark::State& state) {
    CriTable table(ChannelConfig::fair(1));
    double x = 0.5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(poisson_mixture_L(x, table).value);
        x = x < 64.0 ? x * 1.01 : 0.5;
    }
}
BENCHMARK(BM_PoissonMixture);

static void BM_StableThroughput(benchmark::State& state) {
    for (auto _ : state) {
        CriTable table(ChannelConfig::fair(int(state.range(0))));
        benchmark::DoNotOptimize(stable_throughput_bounds(table));
    }
}
BENCHMARK(BM_StableThroughput)->Arg(1)->Arg(4);
