#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "levyavg/model.hpp"
#include "levyavg/simulate.hpp"

namespace levyavg {

struct FbarConfig {
  /// Burn-in T_b; unset means 10/η with η = 2β₁ − 2β₄ from the declared
  /// constants (undeclared C's count as 0).
  std::optional<double> burn_in;
  double horizon = 1000.0;  // averaging window T_a
  std::size_t replicas = 16;
  double step = 1.0 / 64.0;  // natural-time step of the frozen run
  std::uint64_t seed = 1;
  std::optional<StateVector> y0;  // defaults to model.y0
  double stderr_tolerance = std::numeric_limits<double>::infinity();
  unsigned threads = 1;

  double resolved_burn_in(const SlowFastModel& model) const;
};

struct FbarEstimate {
  StateVector value;
  StateVector std_error;
  bool flagged = false;  // some stderr above the configured tolerance
};

/// Time average of f(x, Y^{x,y₀}) over [T_b, T_b + T_a] per replica, then
/// mean and standard error over replicas. Replica r draws from
/// (seed, Frozen, 2r) and (seed, Frozen, 2r+1) whatever x is, so estimates
/// at different x share their noise.
FbarEstimate estimate_fbar(const SlowFastModel& model, std::span<const double> x, const FbarConfig& cfg);
/// Scalar form for d = 1, or every component set to x.
FbarEstimate estimate_fbar(const SlowFastModel& model, double x, const FbarConfig& cfg);

struct StationaryMoments {
  StateVector mean, mean_stderr;
  StateVector variance, variance_stderr;
};

/// Time-averaged mean and variance of Y^{x,y₀} over the same window.
StationaryMoments estimate_stationary_moments(const SlowFastModel& model, std::span<const double> x,
                                              const FbarConfig& cfg);

/// Interpolated f̄ table: one natural cubic spline per component over
/// Chebyshev-Lobatto nodes, linear extrapolation off the table.
class AveragedCoefficient final : public FbarMap {
 public:
  struct Component {
    std::vector<double> x;
    std::vector<double> value;
    std::vector<double> std_error;
    std::vector<bool> ok;
  };

  static constexpr int kFormatVersion = 1;

  AveragedCoefficient() = default;
  AveragedCoefficient(std::vector<Component> components, FbarConfig cfg, double burn_in);

  double value(int component, double x) const override;
  bool contains(int component, double x) const override;
  double derivative(int component, double x) const;

  int dim() const noexcept { return static_cast<int>(components_.size()); }
  const Component& component(int k) const { return components_.at(k); }
  const FbarConfig& config() const noexcept { return cfg_; }
  double burn_in() const noexcept { return burn_in_; }
  std::string interpolation() const { return "natural-cubic-spline"; }

  double max_stderr() const;
  std::size_t failed_nodes() const;
  /// max |s'(x)| over a dense sample of every component's interval.
  double lipschitz() const;

  void write_csv(const std::filesystem::path& file) const;
  /// Throws StaleCache on a version mismatch or malformed content.
  static AveragedCoefficient read_csv(const std::filesystem::path& file);

  friend bool operator==(const AveragedCoefficient& a, const AveragedCoefficient& b);

 private:
  void build_splines();

  std::vector<Component> components_;
  std::vector<std::vector<double>> knots_x_, knots_y_, second_;  // over ok nodes
  FbarConfig cfg_;
  double burn_in_ = 0.0;
};

std::vector<double> chebyshev_lobatto_nodes(double lo, double hi, std::size_t n);

/// f̄ at Chebyshev-Lobatto nodes of [lo, hi]; the state at node j has every
/// component equal to x_j, so one run serves all components. A node whose
/// run fails is masked out of the spline, not fatal.
AveragedCoefficient build_fbar_table(const SlowFastModel& model, SampleBox box, std::size_t n_nodes,
                                     const FbarConfig& cfg);

struct MixingConfig {
  std::size_t replicas = 10000;
  double step = 1.0 / 64.0;
  std::uint64_t seed = 1;
  /// Known f̄(x); when unset it is estimated with `fbar`.
  std::optional<double> fbar_value;
  FbarConfig fbar;
  int component = 0;
  unsigned threads = 1;
};

struct MixingReport {
  double x = 0.0;
  double y0 = 0.0;
  std::vector<double> lags;
  std::vector<double> curve;        // (mean_t − f̄)²
  std::vector<double> noise_floor;  // squared standard error at each lag
  double fbar = 0.0;
  double fbar_stderr = 0.0;
  std::vector<std::size_t> fit_indices;  // lags with curve > 10 × floor
  double eta_hat = 0.0;
  double fit_intercept = 0.0;
  double fit_residual = 0.0;
  double eta_declared = 0.0;
  bool monotone_above_floor = false;
};

/// Squared bias ‖E f(x, Y_t) − f̄(x)‖² of the frozen dynamics from y₀, for
/// each lag (rounded to the step), and the exponential rate fitted to
/// log(curve − floor) where the curve exceeds ten times its noise floor.
/// Throws NoSignal when fewer than two lags clear that bar.
MixingReport estimate_mixing(const SlowFastModel& model, double x, double y0, std::span<const double> lags,
                             const MixingConfig& cfg);

struct EnvelopeFit {
  double rate = 0.0;      // common η used for the envelope
  double constant = 0.0;  // C in C e^{-ηt}(1 + x² + y₀²)
  double relative_residual = 0.0;
  std::size_t points = 0;
};

/// One constant for all (x, y₀) curves: least squares in log space of
/// curve / (e^{-ηt}(1 + x² + y₀²)) over the fitted lags, η the mean of the
/// per-curve rates. relative_residual is exp(rms log residual) − 1.
EnvelopeFit fit_mixing_envelope(std::span<const MixingReport> reports);

}  // namespace levyavg
