#include <gtest/gtest.h>

#include <cmath>

#include "levyavg/error.hpp"
#include "levyavg/model.hpp"
#include "levyavg/noise_bundle.hpp"
#include "levyavg/rng.hpp"
#include "levyavg/simulate.hpp"
#include "levyavg/stats.hpp"

using namespace levyavg;

namespace {

const nlohmann::json kNoSlowJumps = {{"kind", "none"}};

SlowFastModel model_with(nlohmann::json overrides) { return load_model(overrides); }

/// Scalar exponential Euler for Brownian-only models, written directly from
/// the noise timelines.
std::pair<std::vector<double>, std::vector<double>> reference_scalar(const SlowFastModel& m, const NoiseBundle& nb) {
  const double lambda = m.space.eigenvalue(0);
  const double eps = nb.fast.epsilon;
  const auto& st = nb.slow.timeline.t;
  const auto& ft = nb.fast.timeline.t;
  double x = m.x0[0], y = m.y0[0];
  std::vector<double> xs{x}, ys{y};
  for (std::size_t i = 0; i + 1 < st.size(); ++i) {
    const double a = st[i], b = st[i + 1];
    double drift = 0.0;
    for (std::size_t j = nb.fast.slow_positions[i]; j < nb.fast.slow_positions[i + 1]; ++j) {
      const double u = ft[j], v = ft[j + 1];
      drift += std::exp(-lambda * (b - v)) * (1.0 - std::exp(-lambda * (v - u))) / lambda * m.coeffs.f(x, y);
      const double tau = (v - u) / eps;
      const double decay = std::exp(-lambda * tau);
      y = decay * y + (1.0 - decay) / lambda * m.coeffs.F(x, y) + decay / std::sqrt(eps) * m.coeffs.G(x, y) * nb.fast.w2[j];
    }
    x = std::exp(-lambda * (b - a)) * x + drift + std::exp(-lambda * (b - a)) * m.coeffs.g(x) * nb.slow.w1[i];
    xs.push_back(x);
    ys.push_back(y);
  }
  return {xs, ys};
}

}  // namespace

TEST(Coupled, ZeroNoiseZeroDriftIsSemigroup) {
  const auto m = model_with({{"f", "0"}, {"g", "0"}, {"h", "0"}, {"x0", 1.5}});
  const auto grid = TimeGrid::make(2.0, 1.0 / 32, 1.0 / 128);
  const auto p = simulate_coupled(m, generate_noise(m, grid, 0.1, 1, 0));
  EXPECT_NEAR(p.x.back(), 1.5 * std::exp(-2.0), 1e-12);
  for (std::size_t i = 0; i < p.nodes(); ++i) EXPECT_NEAR(p.x[i], 1.5 * std::exp(-p.t[i]), 1e-12);
}

TEST(Coupled, MatchesIndependentIntegratorAtUnitEpsilon) {
  const auto m = model_with({{"base", "benchmark-nojump"}, {"nu1", kNoSlowJumps}, {"epsilon", 1.0}, {"y0", 0.4}});
  const auto grid = TimeGrid::make(1.0, 1.0 / 16, 1.0 / 64);
  for (std::uint32_t path = 0; path < 5; ++path) {
    const auto nb = generate_noise(m, grid, 1.0, 21, path);
    const auto p = simulate_coupled(m, nb);
    const auto [xs, ys] = reference_scalar(m, nb);
    ASSERT_EQ(xs.size(), p.nodes());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      EXPECT_NEAR(p.x[i], xs[i], 1e-10);
      EXPECT_NEAR(p.y[i], ys[i], 1e-10);
    }
  }
}

TEST(Coupled, SelfConvergenceUnderCoarsening) {
  const auto m = builtin_benchmark();
  const auto grid = TimeGrid::make(1.0, 1.0 / 256, 1.0 / 1024);
  MomentAccumulator fine_mid, mid_coarse;
  for (std::uint32_t path = 0; path < 1000; ++path) {
    const auto nb = generate_noise(m, grid, 0.1, 3, path);
    const double x1 = simulate_coupled(m, nb).x.back();
    const double x2 = simulate_coupled(m, coarsen(nb, 2)).x.back();
    const double x4 = simulate_coupled(m, coarsen(nb, 4)).x.back();
    fine_mid.add((x1 - x2) * (x1 - x2));
    mid_coarse.add((x2 - x4) * (x2 - x4));
  }
  const double ratio = std::sqrt(fine_mid.mean() / mid_coarse.mean());
  EXPECT_GE(ratio, 0.4);
  EXPECT_LE(ratio, 1.0);
}

TEST(Coupled, UsesEveryIncrementOnce) {
  const auto m = builtin_benchmark();
  const auto grid = TimeGrid::make(2.0, 1.0 / 16, 1.0 / 64);
  const auto nb = generate_noise(m, grid, 0.05, 4, 0);
  const auto p = simulate_coupled(m, nb);
  EXPECT_EQ(p.usage.w1_increments, nb.slow.timeline.pieces());
  EXPECT_EQ(p.usage.n1_events, nb.slow.n1.size());
  EXPECT_EQ(p.usage.w2_increments, nb.fast.timeline.pieces());
  EXPECT_EQ(p.usage.n2_events, nb.fast.n2.size());
  EXPECT_GT(p.usage.n2_events, 0u);
}

TEST(Coupled, RejectsForeignNoise) {
  const auto m = builtin_benchmark();
  const auto grid = TimeGrid::make(1.0, 1.0 / 16, 1.0 / 64);
  auto nb = generate_noise(m, grid, 0.1, 4, 0);
  nb.fast = generate_noise(m, TimeGrid::make(1.0, 1.0 / 8, 1.0 / 64), 0.1, 4, 0).fast;
  EXPECT_THROW(simulate_coupled(m, nb), Error);
  EXPECT_THROW(simulate_coupled(load_model("builtin:benchmark-laplacian16"), generate_noise(m, grid, 0.1, 4, 0)), Error);
}

TEST(Coupled, BlowUpReportsLastFiniteState) {
  const auto m = model_with({{"F", "y*y*y"}, {"y0", 10.0}});
  const auto grid = TimeGrid::make(1.0, 1.0 / 16, 1.0 / 64);
  try {
    simulate_coupled(m, generate_noise(m, grid, 0.1, 1, 0));
    FAIL();
  } catch (const BlowUpError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBlowUp);
    EXPECT_LE(e.last_finite_time(), e.time());
    ASSERT_EQ(e.last_finite_state().size(), 1u);
    EXPECT_TRUE(std::isfinite(e.last_finite_state()[0]));
  }
}

TEST(Coupled, PinnedFastVariableMatchesReducedRun) {
  const auto m = model_with({{"F", "y"}, {"G", "0"}, {"H", "0"}, {"y0", 0.3}});
  const auto grid = TimeGrid::make(1.0, 1.0 / 32, 1.0 / 256);
  const FunctionFbar fbar([&](double x) { return m.coeffs.f(x, 0.3); });
  for (std::uint32_t path = 0; path < 4; ++path) {
    const auto nb = generate_noise(m, grid, 0.1, 8, path);
    const auto coupled = simulate_coupled(m, nb);
    const auto reduced = simulate_reduced(m, fbar, nb.slow);
    for (double y : coupled.y) EXPECT_NEAR(y, 0.3, 1e-14);
    for (std::size_t i = 0; i < coupled.nodes(); ++i) EXPECT_NEAR(coupled.x[i], reduced.x[i], 1e-10);
  }
}

TEST(Reduced, ZeroDriftZeroNoiseIsSemigroup) {
  const auto m = model_with({{"g", "0"}, {"h", "0"}, {"x0", -0.7}});
  const auto grid = TimeGrid::make(3.0, 1.0 / 8, 1.0 / 8);
  const FunctionFbar zero([](double) { return 0.0; });
  const auto p = simulate_reduced(m, zero, generate_slow_noise(m, grid, 2, 0));
  for (std::size_t i = 0; i < p.nodes(); ++i) EXPECT_NEAR(p.x[i], -0.7 * std::exp(-p.t[i]), 1e-13);
}

TEST(Reduced, TouchesNoFastNoise) {
  const auto m = builtin_benchmark();
  const auto grid = TimeGrid::make(2.0, 1.0 / 16, 1.0 / 16);
  const auto slow = generate_slow_noise(m, grid, 2, 0);
  const auto p = simulate_reduced(m, FunctionFbar([](double x) { return std::sin(x); }), slow);
  EXPECT_EQ(p.usage.w2_increments, 0u);
  EXPECT_EQ(p.usage.n2_events, 0u);
  EXPECT_EQ(p.usage.w1_increments, slow.timeline.pieces());
  EXPECT_EQ(p.usage.n1_events, slow.n1.size());
  EXPECT_TRUE(p.y.empty());
}

TEST(Reduced, YFreeDriftMatchesCoupledExactly) {
  const auto m = load_model("builtin:benchmark-yfree");
  const auto grid = TimeGrid::make(1.0, 1.0 / 32, 1.0 / 128);
  const FunctionFbar fbar([&](double x) { return m.coeffs.f(x, 0.0); });
  const auto nb = generate_noise(m, grid, 0.1, 5, 0);
  EXPECT_EQ(sup_distance(simulate_coupled(m, nb), simulate_reduced(m, fbar, nb.slow), 2.0), 0.0);
}

TEST(Frozen, LinearOdeConvergesAtFirstOrder) {
  const auto m = model_with({{"G", "0"}, {"H", "0"}, {"nu2", kNoSlowJumps}});
  const double x[] = {1.0}, y0[] = {1.0};
  const double target = std::tanh(1.0) / 2.0 + (1.0 - std::tanh(1.0) / 2.0) * std::exp(-2.0);
  std::vector<double> errors;
  for (double step : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    RandomStream b(1, StreamKind::kGeneric, 0), j(1, StreamKind::kGeneric, 1);
    double last = 0.0;
    // the callback sees left states, so run one step past t = 1
    run_frozen(m, x, y0, 1.0 + step, step, b, j, [&](double u, double, std::span<const double> s) {
      if (std::abs(u - 1.0) < 1e-12) last = s[0];
    });
    errors.push_back(std::abs(last - target));
  }
  EXPECT_NEAR(errors[1] / errors[0], 0.5, 0.1);
  EXPECT_NEAR(errors[2] / errors[1], 0.5, 0.1);
}

TEST(Frozen, StationaryMeanAndVariance) {
  const auto m = load_model("builtin:benchmark-nojump");
  const double x[] = {1.0}, y0[] = {0.0};
  MomentAccumulator acc;
  const double horizon = 5.0, step = 1.0 / 256;
  for (std::uint32_t path = 0; path < 4000; ++path) {
    RandomStream b(2, StreamKind::kFrozen, 2 * path), j(2, StreamKind::kFrozen, 2 * path + 1);
    double end = 0.0;
    run_frozen(m, x, y0, horizon + step, step, b, j, [&](double u, double, std::span<const double> s) {
      if (std::abs(u - horizon) < 1e-9) end = s[0];
    });
    acc.add(end);
  }
  EXPECT_NEAR(acc.mean(), std::tanh(1.0) / 2.0, 4.0 * acc.std_error());
  EXPECT_NEAR(acc.variance(), 0.0625, 0.006);
}

TEST(Frozen, CountsRunsAndRequiresUnitEpsilonNoise) {
  const auto m = builtin_benchmark();
  const auto grid = TimeGrid::make(1.0, 1.0 / 8, 1.0 / 32);
  const double x[] = {0.5}, y0[] = {0.0};
  reset_frozen_run_count();
  const auto nb = generate_noise(m, grid, 1.0, 1, 0);
  const auto fp = simulate_frozen(m, x, y0, nb.fast);
  EXPECT_EQ(fp.t.size(), nb.fast.timeline.size());
  EXPECT_EQ(frozen_run_count(), 1u);
  EXPECT_THROW(simulate_frozen(m, x, y0, generate_noise(m, grid, 0.5, 1, 0).fast), Error);
}

TEST(Auxiliary, WholeHorizonBlockIsSingleBlock) {
  const auto m = builtin_benchmark();
  const auto grid = TimeGrid::make(1.0, 1.0 / 16, 1.0 / 64);
  const auto nb = generate_noise(m, grid, 0.1, 6, 0);
  const auto aux = simulate_auxiliary(m, 5.0, nb, simulate_coupled(m, nb));
  EXPECT_EQ(aux.block_steps, grid.n_slow);
}

TEST(Auxiliary, SingleStepBlocksWithoutSlowJumpsReproduceX) {
  const auto m = model_with({{"nu1", kNoSlowJumps}});
  const auto grid = TimeGrid::make(1.0, 1.0 / 16, 1.0 / 64);
  const auto nb = generate_noise(m, grid, 0.1, 6, 1);
  const auto coupled = simulate_coupled(m, nb);
  const auto aux = simulate_auxiliary(m, grid.h(), nb, coupled);
  EXPECT_EQ(aux.x_hat, coupled.x);
  EXPECT_EQ(aux.y_hat, coupled.y);
}

TEST(Auxiliary, RejectsBadBlocksAndPairings) {
  const auto m = builtin_benchmark();
  const auto grid = TimeGrid::make(1.0, 1.0 / 16, 1.0 / 64);
  const auto nb = generate_noise(m, grid, 0.1, 6, 0);
  const auto coupled = simulate_coupled(m, nb);
  EXPECT_THROW(simulate_auxiliary(m, 1.5 / 16, nb, coupled), Error);
  EXPECT_THROW(simulate_auxiliary(m, 0.0, nb, coupled), Error);
  EXPECT_THROW(simulate_auxiliary(m, 1.0 / 8, generate_noise(m, grid, 0.1, 6, 1), coupled), Error);
}

TEST(Auxiliary, GapShrinksWithBlockLength) {
  const auto m = builtin_benchmark();
  const double eps = 0.01;
  const auto grid = TimeGrid::for_epsilon(1.0, 1.0 / 64, 1.0 / 16, eps);
  MomentAccumulator big, small;
  for (std::uint32_t path = 0; path < 40; ++path) {
    const auto nb = generate_noise(m, grid, eps, 12, path);
    const auto coupled = simulate_coupled(m, nb);
    auto gap = [&](double delta) {
      const auto aux = simulate_auxiliary(m, delta, nb, coupled);
      double g = 0.0;
      for (std::size_t i = 0; i < aux.x_hat.size(); ++i) g = std::max(g, std::abs(aux.x_hat[i] - coupled.x[i]));
      return g;
    };
    big.add(gap(0.5));
    small.add(gap(1.0 / 64));
  }
  EXPECT_LT(small.mean(), big.mean());
}

TEST(Energy, DeterministicSemigroupHasNoResidual) {
  const auto m = model_with({{"f", "0"}, {"g", "0"}, {"h", "0"}, {"x0", 2.0}});
  const auto grid = TimeGrid::make(1.0, 1.0 / 32, 1.0 / 64);
  const auto nb = generate_noise(m, grid, 0.1, 1, 0);
  const auto p = simulate_coupled(m, nb);
  for (int q : {1, 2, 3}) {
    for (double r : energy_residual(p, m, nb, q)) EXPECT_LE(std::abs(r), 1e-8);
  }
}

TEST(Energy, JumpOnlyResidualVanishes) {
  const auto m = model_with({{"f", "0"}, {"g", "0"}, {"x0", 1.0}});
  const auto grid = TimeGrid::make(4.0, 1.0 / 16, 1.0 / 16);
  const auto nb = generate_noise(m, grid, 0.5, 2, 0);
  ASSERT_GT(nb.slow.n1.size(), 0u);
  const auto p = simulate_coupled(m, nb);
  for (double r : energy_residual(p, m, nb, 2)) EXPECT_LE(std::abs(r), 1e-12);
}

TEST(Energy, ResidualShrinksWithStep) {
  const auto m = builtin_benchmark();
  const auto fine = TimeGrid::make(1.0, 1.0 / 128, 1.0 / 512);
  MomentAccumulator coarse_acc, fine_acc;
  for (std::uint32_t path = 0; path < 100; ++path) {
    const auto nb = generate_noise(m, fine, 0.1, 14, path);
    const auto nc = coarsen(nb, 2);
    fine_acc.add(std::abs(energy_residual(simulate_coupled(m, nb), m, nb, 1).back()));
    coarse_acc.add(std::abs(energy_residual(simulate_coupled(m, nc), m, nc, 1).back()));
  }
  EXPECT_GE(coarse_acc.mean() / fine_acc.mean(), 1.5);
}

TEST(Energy, RejectsMismatchedInputs) {
  const auto m = builtin_benchmark();
  const auto grid = TimeGrid::make(1.0, 1.0 / 16, 1.0 / 16);
  const auto nb = generate_noise(m, grid, 0.1, 1, 0);
  const auto p = simulate_coupled(m, nb);
  EXPECT_THROW(energy_residual(p, m, nb, 0), Error);
  EXPECT_THROW(energy_residual(p, m, generate_noise(m, grid, 0.1, 1, 1), 1), Error);
}
