#pragma once

// Test-only reference computations, written independently of the library
// code paths they check.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

/// E sin(a + Y) for Y ~ N(m, s2) by composite Simpson on m ± 12 s.
inline double gaussian_sin_expectation(double a, double m, double s2) {
  const double s = std::sqrt(s2);
  const int n = 20000;
  const double lo = m - 12.0 * s, hi = m + 12.0 * s, dy = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double y = lo + i * dy;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * std::sin(a + y) * std::exp(-0.5 * (y - m) * (y - m) / s2);
  }
  return acc * dy / 3.0 / std::sqrt(2.0 * std::numbers::pi * s2);
}

struct LongRun {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Time average of sin(x + Y) along one Euler-Maruyama trajectory of
/// dY = (tanh x - 2Y) dt + 0.5 dW + 0.2 z dN, N of rate 1 with z uniform on
/// [-0.5, 0.5] (the compensator vanishes by symmetry). Standard error from
/// batch means.
inline LongRun benchmark_fbar_long_run(double x, std::size_t steps, double dt, std::uint64_t seed,
                                       std::size_t batches = 100) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  std::exponential_distribution<double> wait(1.0);
  double y = std::tanh(x) / 2.0;
  double next_jump = wait(gen);
  double t = 0.0;
  const std::size_t burn = static_cast<std::size_t>(10.0 / dt);
  for (std::size_t i = 0; i < burn; ++i) {
    y += (std::tanh(x) - 2.0 * y) * dt + 0.5 * std::sqrt(dt) * normal(gen);
    t += dt;
    while (next_jump <= t) {
      y += 0.2 * unif(gen);
      next_jump += wait(gen);
    }
  }
  const std::size_t per_batch = steps / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < per_batch; ++i) {
      acc += std::sin(x + y);
      y += (std::tanh(x) - 2.0 * y) * dt + 0.5 * std::sqrt(dt) * normal(gen);
      t += dt;
      while (next_jump <= t) {
        y += 0.2 * unif(gen);
        next_jump += wait(gen);
      }
    }
    means.push_back(acc / static_cast<double>(per_batch));
  }
  LongRun out;
  for (double m : means) out.mean += m;
  out.mean /= static_cast<double>(batches);
  double ss = 0.0;
  for (double m : means) ss += (m - out.mean) * (m - out.mean);
  out.std_error = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
  return out;
}

}  // namespace oracle
