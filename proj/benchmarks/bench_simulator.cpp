#include <benchmark/benchmark.h>

#include "mprtree/simulator.hpp"

using namespace mprtree;

static void BM_RunCri(benchmark::State& state) {
    const auto cfg = ChannelConfig::fair(int(state.range(1)));
    const auto n = state.range(0);
    std::uint64_t seed = 1;
    std::int64_t slots = 0;
    for (auto _ : state) {
        const auto trace = run_cri(n, cfg, seed++);
        slots += trace.length;
        benchmark::DoNotOptimize(trace.length);
    }
    state.counters["slots/s"] =
        benchmark::Counter(double(slots), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_RunCri)->Args({10, 1})->Args({100, 1})->Args({100, 4})->Args({1000, 4});

static void BM_EstimateLn(benchmark::State& state) {
    const auto cfg = ChannelConfig::fair(2);
    for (auto _ : state)
        benchmark::DoNotOptimize(estimate_L_n(10, cfg, 20000, 42, /*threads=*/1));
}
BENCHMARK(BM_EstimateLn);
