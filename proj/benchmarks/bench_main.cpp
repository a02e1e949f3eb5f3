#include <benchmark/benchmark.h>

#include <vector>

#include "levyavg/averaging.hpp"
#include "levyavg/model.hpp"
#include "levyavg/noise_bundle.hpp"
#include "levyavg/quadrature.hpp"
#include "levyavg/rng.hpp"
#include "levyavg/simulate.hpp"

using namespace levyavg;

static void BM_Philox(benchmark::State& state) {
  std::array<std::uint32_t, 4> ctr{0, 0, 0, 0};
  for (auto _ : state) {
    ctr = philox4x32_10(ctr, {0x12345678u, 0x9abcdef0u});
    benchmark::DoNotOptimize(ctr);
  }
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Philox);

static void BM_Normal(benchmark::State& state) {
  RandomStream stream(1, StreamKind::kGeneric, 0);
  for (auto _ : state) benchmark::DoNotOptimize(stream.normal());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Normal);

static void BM_GaussLegendre(benchmark::State& state) {
  const auto& rule = gauss_legendre(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::exp(-rule.nodes[i]);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_GaussLegendre)->Arg(16)->Arg(64);

static void BM_NoiseGeneration(benchmark::State& state) {
  const SlowFastModel model = builtin_benchmark().with_epsilon(1.0 / static_cast<double>(state.range(0)));
  const TimeGrid grid = TimeGrid::for_epsilon(1.0, 1.0 / 64.0, 1.0 / 64.0, model.epsilon);
  std::uint32_t path = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_noise(model, grid, 7, path++));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.n_fast()));
}
BENCHMARK(BM_NoiseGeneration)->Arg(16)->Arg(512)->Unit(benchmark::kMillisecond);

// Fast substeps per second of the coupled stepper, noise generated outside
// the timed region.
static void BM_CoupledStepper(benchmark::State& state) {
  const SlowFastModel model = builtin_benchmark().with_epsilon(1.0 / static_cast<double>(state.range(0)));
  const TimeGrid grid = TimeGrid::for_epsilon(1.0, 1.0 / 64.0, 1.0 / 64.0, model.epsilon);
  const NoiseBundle noise = generate_noise(model, grid, 7, 0);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_coupled(model, noise));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(noise.fast.timeline.pieces()));
}
BENCHMARK(BM_CoupledStepper)->Arg(16)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_ReducedStepper(benchmark::State& state) {
  const SlowFastModel model = builtin_benchmark();
  const TimeGrid grid = TimeGrid::make(1.0, 1.0 / 1024.0, 1.0 / 1024.0);
  const SlowNoise noise = generate_slow_noise(model, grid, 7, 0);
  const FunctionFbar fbar([](double x) { return std::sin(x); });
  for (auto _ : state) benchmark::DoNotOptimize(simulate_reduced(model, fbar, noise));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(noise.timeline.pieces()));
}
BENCHMARK(BM_ReducedStepper);

static void BM_FrozenRun(benchmark::State& state) {
  const SlowFastModel model = builtin_benchmark();
  const double x[] = {1.0}, y0[] = {0.0};
  std::uint32_t path = 0;
  for (auto _ : state) {
    RandomStream brownian(1, StreamKind::kFrozen, path++);
    RandomStream jumps(1, StreamKind::kFrozen, path++);
    double acc = 0.0;
    run_frozen(model, x, y0, 100.0, 1.0 / 64.0, brownian, jumps,
               [&](double u, double v, std::span<const double> y) { acc += (v - u) * y[0]; });
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * 6400);
}
BENCHMARK(BM_FrozenRun)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
