#include <benchmark/benchmark.h>

#include "pemadm/scenarios.hpp"
#include "pemadm/sim.hpp"

namespace {

using namespace pemadm;

struct Fixture {
    CarFollowingScenario scenario = build_car_following(CarFollowingParams{});
    Controller controller;
    Fixture() {
        controller.gains = {(Matrix(1, 2) << 0.0, -3.6).finished(), (Matrix(1, 2) << -1.22, -2.66).finished()};
    }
    MonteCarloSpec spec(int trials) const {
        MonteCarloSpec s;
        s.x0 = scenario.x0;
        s.r0 = scenario.r0;
        s.horizon = 3000;
        s.bias = scenario.bias;
        s.trials = trials;
        s.master_seed = 7;
        s.gap_offset = scenario.delta_d;
        return s;
    }
};

void BM_MonteCarloSerial(benchmark::State& state) {
    const Fixture f;
    const auto spec = f.spec(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(monte_carlo_serial(f.scenario.model, f.controller, spec));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MonteCarloParallel(benchmark::State& state) {
    const Fixture f;
    auto spec = f.spec(static_cast<int>(state.range(0)));
    spec.threads = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(monte_carlo(f.scenario.model, f.controller, spec));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_MonteCarloSerial)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloParallel)->Args({200, 1})->Args({200, 2})->Args({200, 4})->Args({200, 8})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
