#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "levyavg/rng.hpp"

namespace levyavg {

inline constexpr double kInfiniteCutoff = std::numeric_limits<double>::infinity();

struct JumpAtom {
  double size = 0.0;
  double mass = 0.0;  // events per unit time at this size
};

/// Piecewise-constant density: `mass` events per unit time spread
/// uniformly over [lo, hi).
struct JumpBin {
  double lo = 0.0;
  double hi = 0.0;
  double mass = 0.0;
};

enum class MeasureKind { kAtoms, kUniform, kTable };

/// Finite Lévy jump measure supported on |z| < cutoff.
///
/// Integrals against the measure go through a fixed quadrature rule built
/// once at construction: exact nodes for atoms, 64-point Gauss-Legendre on
/// every density bin. The rule is what makes compensators deterministic.
class JumpMeasure {
 public:
  JumpMeasure() = default;

  static JumpMeasure none(double cutoff = kInfiniteCutoff);
  static JumpMeasure atoms(std::vector<JumpAtom> atoms, double cutoff = kInfiniteCutoff);
  static JumpMeasure uniform(double rate, double lo, double hi, double cutoff = kInfiniteCutoff);
  static JumpMeasure table(std::vector<JumpBin> bins, double cutoff = kInfiniteCutoff);
  static JumpMeasure mixed(std::vector<JumpAtom> atoms, std::vector<JumpBin> bins,
                           double cutoff = kInfiniteCutoff);

  /// {kind: "none"|"atoms"|"uniform"|"table", rate, params, cutoff_c}
  static JumpMeasure from_config(const nlohmann::json& config);
  nlohmann::json to_config() const;

  MeasureKind kind() const noexcept { return kind_; }
  double total_rate() const noexcept { return total_rate_; }
  double cutoff() const noexcept { return cutoff_; }
  bool empty() const noexcept { return total_rate_ == 0.0; }
  std::span<const JumpAtom> atom_list() const noexcept { return atoms_; }
  std::span<const JumpBin> bin_list() const noexcept { return bins_; }

  /// Draws one jump size from ν / total_rate. Requires total_rate > 0.
  double sample_size(RandomStream& stream) const;

  /// ∫ |z|^q ν(dz), exact for atoms and bins (integration split at 0).
  double moment(int q) const;

  /// ∫ φ(z) ν(dz) by the attached quadrature rule.
  template <class Fn>
  double integrate(Fn&& phi) const {
    double total = 0.0;
    for (std::size_t i = 0; i < quad_nodes_.size(); ++i) total += quad_weights_[i] * phi(quad_nodes_[i]);
    return total;
  }

  std::span<const double> quadrature_nodes() const noexcept { return quad_nodes_; }
  std::span<const double> quadrature_weights() const noexcept { return quad_weights_; }

 private:
  void finalize();

  MeasureKind kind_ = MeasureKind::kAtoms;
  double cutoff_ = kInfiniteCutoff;
  double total_rate_ = 0.0;
  std::vector<JumpAtom> atoms_;
  std::vector<JumpBin> bins_;
  std::vector<double> cumulative_;  // atoms first, then bins
  std::vector<double> quad_nodes_;
  std::vector<double> quad_weights_;
};

/// Which small-jump indicator the Lévy-Khintchine exponent uses. The
/// one-sided form 1_{z<1} is the default; the symmetric 1_{|z|<1} is the
/// textbook alternative. The two agree for measures on (-1, 1).
enum class SmallJumpIndicator { kOneSided, kSymmetric };

struct LevyTriplet {
  double drift = 0.0;  // ϱ
  double sigma = 0.0;  // Gaussian standard deviation, >= 0
  JumpMeasure measure;  // full (finite) Lévy measure
  double cutoff = 1.0;  // small/large split used by the Lévy-Itô decomposition
  SmallJumpIndicator indicator = SmallJumpIndicator::kOneSided;

  void validate() const;
};

/// Lévy-Itô data: L(t) = b1 t + σ W(t) + ∫_{|z|<c} z Ñ(t,dz) + ∫_{|z|>=c} z N(t,dz).
struct LevyComponents {
  double b1 = 0.0;
  double sigma = 0.0;
  JumpMeasure small;  // supported on |z| < c, cutoff c
  JumpMeasure large;  // supported on |z| >= c
};

/// Characteristic exponent ψ(θ) with E exp(iθL(1)) = exp(ψ(θ)).
std::complex<double> characteristic_exponent(const LevyTriplet& triplet, double theta);
std::complex<double> characteristic_function(const LevyTriplet& triplet, double theta);

LevyComponents triplet_to_components(const LevyTriplet& triplet);

/// Draws n independent increments L(dt) through the Lévy-Itô decomposition.
std::vector<double> sample_increments(const LevyComponents& components, double dt, std::size_t n,
                                      RandomStream& stream);

struct CfComparison {
  std::vector<double> theta;
  std::vector<std::complex<double>> empirical;
  std::vector<std::complex<double>> analytic;
  double max_error = 0.0;  // max over θ of |empirical − analytic|
};

/// Empirical characteristic function of n unit-time increments against
/// the Lévy-Khintchine value at each θ.
CfComparison compare_characteristic_function(const LevyTriplet& triplet, std::span<const double> thetas,
                                             std::size_t n, RandomStream& stream);

struct JumpEvent {
  double time = 0.0;
  double size = 0.0;
};

struct JumpEventList {
  std::vector<JumpEvent> events;
  double horizon = 0.0;

  std::size_t size() const noexcept { return events.size(); }
  /// Throws InvalidGrid unless times are strictly increasing in [0, horizon]
  /// and every |z| < cutoff.
  void validate(double cutoff) const;
};

/// Independent N(0, Δt) increments per component for every cell of `grid`.
/// Row-major: increments[cell * dim + k].
std::vector<double> sample_brownian(std::span<const double> grid, int dim, RandomStream& stream);

/// Poisson arrivals on [0, horizon] with rate total_rate * intensity_scale.
JumpEventList sample_jump_events(const JumpMeasure& measure, double horizon, double intensity_scale,
                                 RandomStream& stream);

/// Per-cell increments of ∫∫ φ(X_{s-}, z) Ñ(ds, dz) for a scalar path that is
/// piecewise constant on the cells of `grid` (path[i] is the state on cell i).
/// Events fall in the half-open cell [t_i, t_{i+1}); the last cell is closed.
std::vector<double> compensated_integral(const JumpEventList& events, const JumpMeasure& measure,
                                         const std::function<double(double, double)>& integrand,
                                         std::span<const double> path, std::span<const double> grid,
                                         double intensity_scale);

}  // namespace levyavg
