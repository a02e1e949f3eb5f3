#include "levyavg/stats.hpp"

#include <algorithm>
#include <cmath>

#include "levyavg/error.hpp"

namespace levyavg {

double MomentAccumulator::mean() const {
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double MomentAccumulator::variance() const {
  if (count < 2) return 0.0;
  const double n = static_cast<double>(count);
  return std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
}

double MomentAccumulator::std_error() const {
  if (count < 2) return 0.0;
  return std::sqrt(variance() / static_cast<double>(count));
}

double Welford::std_error() const {
  return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::kNumericError, "fit_line needs >= 2 paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::kNumericError, "fit_line: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / n);
  return fit;
}

}  // namespace levyavg
