#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "levyavg/error.hpp"
#include "levyavg/model.hpp"
#include "levyavg/noise_bundle.hpp"

using namespace levyavg;

TEST(TimeGrid, MakeAndAccessors) {
  const auto g = TimeGrid::make(1.0, 1.0 / 64, 1.0 / 256);
  EXPECT_EQ(g.n_slow, 64u);
  EXPECT_EQ(g.fast_per_slow, 4u);
  EXPECT_EQ(g.n_fast(), 256u);
  EXPECT_EQ(g.slow_time(64), 1.0);
  EXPECT_EQ(g.fast_time(8), g.slow_time(2));
  EXPECT_THROW(TimeGrid::make(1.0, 0.3, 0.1), Error);
  EXPECT_THROW(TimeGrid::make(0.0, 0.1, 0.1), Error);
  EXPECT_THROW(TimeGrid::make(1.0, 0.25, 0.5), Error);
}

TEST(TimeGrid, ForEpsilonScalesFastStep) {
  const auto g = TimeGrid::for_epsilon(1.0, 1.0 / 64, 1.0 / 64, 1.0 / 16);
  EXPECT_EQ(g.fast_per_slow, 16u);
  EXPECT_EQ(TimeGrid::for_epsilon(1.0, 1.0 / 64, 1.0 / 64, 0.9).fast_per_slow, 2u);
}

TEST(NoiseBundle, DeterministicPerSeedAndPath) {
  const auto m = builtin_benchmark();
  const auto g = TimeGrid::make(1.0, 1.0 / 32, 1.0 / 128);
  const auto a = generate_noise(m, g, 0.1, 7, 3);
  const auto b = generate_noise(m, g, 0.1, 7, 3);
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(a.fast.w2, b.fast.w2);
  EXPECT_NE(a.fingerprint(), generate_noise(m, g, 0.1, 7, 4).fingerprint());
  EXPECT_NE(a.fingerprint(), generate_noise(m, g, 0.1, 8, 3).fingerprint());
}

TEST(NoiseBundle, SlowNoiseIndependentOfEpsilon) {
  const auto m = builtin_benchmark();
  const auto g = TimeGrid::make(1.0, 1.0 / 32, 1.0 / 32);
  const auto a = generate_noise(m, g, 0.5, 11, 0);
  const auto b = generate_noise(m, g, 0.01, 11, 0);
  EXPECT_EQ(fingerprint(a.slow), fingerprint(b.slow));
  EXPECT_NE(fingerprint(a.fast), fingerprint(b.fast));
}

TEST(NoiseBundle, FastJumpRateIsInverseEpsilon) {
  const auto m = builtin_benchmark();
  const auto g = TimeGrid::make(10.0, 1.0, 1.0);
  for (double eps : {0.5, 0.05}) {
    double total = 0.0;
    const int paths = 200;
    for (int p = 0; p < paths; ++p) total += double(generate_fast_noise(m, generate_slow_noise(m, g, 1, p), eps, 1, p).n2.size());
    const double mean = total / paths;
    const double expected = m.nu2.total_rate() * 10.0 / eps;
    EXPECT_NEAR(mean, expected, 4.0 * std::sqrt(expected / paths)) << eps;
  }
}

TEST(NoiseBundle, TimelinesContainRegularNodesAndEvents) {
  const auto m = builtin_benchmark();
  const auto g = TimeGrid::make(2.0, 1.0 / 16, 1.0 / 64);
  const auto b = generate_noise(m, g, 0.05, 3, 1);
  const auto& slow = b.slow.timeline;
  EXPECT_TRUE(std::is_sorted(slow.t.begin(), slow.t.end()));
  ASSERT_EQ(slow.regular.size(), g.n_slow + 1);
  for (std::size_t k = 0; k <= g.n_slow; ++k) EXPECT_EQ(slow.t[slow.regular[k]], g.slow_time(k));
  for (std::size_t i = 0; i < b.slow.n1.size(); ++i) {
    const auto it = std::find(slow.jump.begin(), slow.jump.end(), static_cast<std::int32_t>(i));
    ASSERT_NE(it, slow.jump.end());
    EXPECT_EQ(slow.t[it - slow.jump.begin()], b.slow.n1.events[i].time);
  }
  const auto& fast = b.fast.timeline;
  EXPECT_EQ(fast.regular.size(), g.n_fast() + 1);
  EXPECT_EQ(std::count_if(fast.fast_jump.begin(), fast.fast_jump.end(), [](int v) { return v >= 0; }),
            static_cast<long>(b.fast.n2.size()));
  EXPECT_EQ(std::count_if(fast.jump.begin(), fast.jump.end(), [](int v) { return v >= 0; }),
            static_cast<long>(b.slow.n1.size()));
  ASSERT_EQ(b.fast.slow_positions.size(), slow.size());
  for (std::size_t i = 0; i < slow.size(); ++i) EXPECT_EQ(fast.t[b.fast.slow_positions[i]], slow.t[i]);
  EXPECT_EQ(b.slow.w1.size(), slow.pieces() * std::size_t(m.dim()));
  EXPECT_EQ(b.fast.w2.size(), fast.pieces() * std::size_t(m.dim()));
}

TEST(NoiseBundle, BrownianIncrementVariance) {
  const auto m = builtin_benchmark();
  const auto g = TimeGrid::make(100.0, 1.0 / 8, 1.0 / 8);
  const auto b = generate_noise(m, g, 0.5, 5, 0);
  double s = 0.0, dt = 0.0;
  for (std::size_t i = 0; i < b.slow.timeline.pieces(); ++i) {
    s += b.slow.w1[i] * b.slow.w1[i];
    dt += b.slow.timeline.t[i + 1] - b.slow.timeline.t[i];
  }
  EXPECT_NEAR(s / dt, 1.0, 0.1);
}

TEST(Coarsen, PreservesTotalsAndEvents) {
  const auto m = builtin_benchmark();
  const auto g = TimeGrid::make(1.0, 1.0 / 64, 1.0 / 256);
  const auto fine = generate_noise(m, g, 0.1, 9, 2);
  const auto coarse = coarsen(fine, 4);
  EXPECT_EQ(coarse.grid.n_slow, 16u);
  EXPECT_EQ(coarse.slow.n1.size(), fine.slow.n1.size());
  EXPECT_EQ(coarse.fast.n2.size(), fine.fast.n2.size());
  const auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
  EXPECT_NEAR(sum(coarse.slow.w1), sum(fine.slow.w1), 1e-12);
  EXPECT_NEAR(sum(coarse.fast.w2), sum(fine.fast.w2), 1e-12);
  EXPECT_EQ(fingerprint(coarsen(fine.slow, 1)), fingerprint(fine.slow));
  EXPECT_THROW(coarsen(fine, 3), Error);
}
