#pragma once

#include <cstddef>
#include <span>

namespace levyavg {

/// Mergeable (count, sum, sum of squares) accumulator. Merging is
/// associative and commutative up to floating-point rounding; callers that
/// need byte-identical output merge in a fixed order.
struct MomentAccumulator {
  std::size_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++count;
    sum += x;
    sum_sq += x * x;
  }
  void merge(const MomentAccumulator& other) {
    count += other.count;
    sum += other.sum;
    sum_sq += other.sum_sq;
  }
  double mean() const;
  /// Unbiased sample variance; 0 when fewer than two samples.
  double variance() const;
  /// Standard error of the mean.
  double std_error() const;
};

/// Weighted running mean (West's update). A constant input stream gives
/// exactly that constant regardless of the weights.
struct RunningMean {
  double total_weight = 0.0;
  double mean = 0.0;

  void add(double x, double weight) {
    if (weight <= 0.0) return;
    total_weight += weight;
    mean += (weight / total_weight) * (x - mean);
  }
};

/// Welford accumulator for unweighted samples; used where the spread of a
/// handful of replicas must be exactly zero for identical inputs.
struct Welford {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Root-mean-square residual of the fit.
  double rms_residual = 0.0;
};

/// Ordinary least squares y = intercept + slope * x. Requires >= 2 points.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace levyavg
