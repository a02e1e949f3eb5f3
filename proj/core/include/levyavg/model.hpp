#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levyavg/levy_noise.hpp"
#include "levyavg/spectral_space.hpp"

namespace levyavg {

/// Scalar coefficient maps. For d > 1 every map acts componentwise in the
/// eigenbasis: f(X, Y)_k = f(X_k, Y_k), and the jump size z is shared.
struct CoefficientSet {
  std::function<double(double, double)> f;          // slow drift f(x, y)
  std::function<double(double)> g;                  // slow diffusion g(x)
  std::function<double(double, double)> h;          // slow jump h(x, z)
  std::function<double(double, double)> F;          // fast drift F(x, y)
  std::function<double(double, double)> G;          // fast diffusion G(x, y)
  std::function<double(double, double, double)> H;  // fast jump H(x, y, z)

  /// Expression text of each map in the order f g h F G H, for config echo.
  std::array<std::string, 6> sources;
  bool f_depends_on_y = true;
  /// False when H(x, y, z) ignores y; the fast compensator is then computed
  /// once per slow piece instead of once per fast substep.
  bool H_depends_on_y = true;
};

struct DeclaredConstants {
  static constexpr double kUndeclared = std::numeric_limits<double>::infinity();

  std::array<double, 4> beta{1.0, 0.5, 0.5, 0.0};
  std::array<double, 5> c{kUndeclared, kUndeclared, kUndeclared, kUndeclared, kUndeclared};
  double f_bound = kUndeclared;
};

struct SlowFastModel {
  std::string name;
  SpectralSpace space = SpectralSpace::scalar();
  CoefficientSet coeffs;
  double epsilon = 0.1;
  JumpMeasure nu1;  // slow jump measure
  JumpMeasure nu2;  // fast jump measure at unit intensity
  DeclaredConstants declared;
  StateVector x0;
  StateVector y0;

  int dim() const noexcept { return space.dim(); }
  /// Throws InvalidConfig if ε ∉ (0, 1] or state sizes disagree with dim.
  void validate() const;
  SlowFastModel with_epsilon(double eps) const;
  nlohmann::json to_config() const;
};

/// Names accepted by builtin_model: benchmark, benchmark-nojump (H ≡ 0,
/// ν₂ = 0), benchmark-yfree (f = sin x) and benchmark-laplacian16
/// (d = 16, λ_k = k²π², x0_k = 1/k).
std::vector<std::string> builtin_model_names();
SlowFastModel builtin_model(const std::string& name);
SlowFastModel builtin_benchmark();

/// Accepts "builtin:<name>", a JSON object with optional "base" builtin
/// plus expression overrides {f, g, h, F, G, H}, "space", "nu1", "nu2",
/// "epsilon", "x0", "y0" and "constants": {beta, C, f_bound}.
SlowFastModel load_model(const nlohmann::json& config);
SlowFastModel load_model(const std::string& spec);
inline SlowFastModel load_model(const char* spec) { return load_model(std::string(spec)); }

struct CoefficientValues {
  StateVector f, g, h, F, G, H;
};

/// Evaluates every coefficient at (x, y, z). Throws CoefficientError naming
/// the map and component on non-finite output.
CoefficientValues eval_coefficients(const SlowFastModel& model, std::span<const double> x,
                                    std::span<const double> y, double z = 0.0);

struct SampleBox {
  double lo = -3.0;
  double hi = 3.0;
};

/// Numerical audit of the dissipativity, Lipschitz and growth hypotheses on
/// a box. Constants are suprema of sampled quotients, so they are lower
/// estimates of the true constants; "globally" is an extrapolation from
/// the box.
struct HypothesisReport {
  SampleBox box;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  double tolerance = 0.0;

  // h1: dissipativity of the fast drift
  double beta1 = 0.0;
  double beta2_hat = 0.0;  // -sup (yF - β₃)/y² with declared β₃
  double beta3_declared = 0.0;
  double beta4_hat = 0.0;  // sup [F(x,y₁)-F(x,y₂)](y₁-y₂)/|y₁-y₂|²

  // h2 (Lipschitz) and h3 (growth) constants; c_hat[1], c_hat[3], c_hat[4] take the
  // max over q ∈ {2, 4, 6}.
  std::array<double, 5> c_hat{};
  std::array<double, 3> c2_by_q{};
  std::array<double, 3> c4_by_q{};
  std::array<double, 3> c5_by_q{};

  // Fast-equation constants entering κ and η.
  double c1_fast = 0.0;  // sup |G(x,y₁)-G(x,y₂)|²/|y₁-y₂|²
  double c2_fast = 0.0;  // sup ∫|H(x,y₁,z)-H(x,y₂,z)|²ν₂/|y₁-y₂|²
  double c3_fast = 0.0;  // sup |G(x,y)|²/(1+x²+y²)

  double f_sup = 0.0;
  double f_sup_inner = 0.0;  // sup over the concentric half-size box
  double f_bound_declared = DeclaredConstants::kUndeclared;

  double kappa_hat = 0.0;  // 2β₁ + 2β̂₂ - Ĉ₃ᶠ - Ĉ₅
  double eta_hat = 0.0;    // 2β₁ - 2β̂₄ - Ĉ₁ᶠ - Ĉ₂ᶠ

  std::size_t non_finite_quotients = 0;

  struct Flags {
    bool h1 = false;
    bool h2 = false;
    bool h3 = false;
    bool h4 = false;
    bool f_bounded = false;
    bool all() const { return h1 && h2 && h3 && h4; }
  };
  /// Pass flags at `tol`; a flag passing at tol passes at every larger tol.
  Flags flags(double tol) const;
  Flags flags() const { return flags(tolerance); }

  nlohmann::json to_json() const;
};

/// Throws InvalidConfig for an empty box or n_samples < 2.
HypothesisReport verify_hypotheses(const SlowFastModel& model, SampleBox box, std::size_t n_samples,
                                   std::uint64_t seed, double tolerance = 0.0);

}  // namespace levyavg
