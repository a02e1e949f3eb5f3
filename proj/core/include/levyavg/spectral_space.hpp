#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace levyavg {

/// Coefficients of a state in the eigenbasis of -A.
using StateVector = std::vector<double>;

double norm(std::span<const double> x);
double squared_norm(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);

struct SemigroupBound {
  double operator_norm = 0.0;  // max_k λ_k^α e^{-λ_k t}
  double bound = 0.0;          // (α/e)^α t^{-α}
};

/// Diagonal truncation of the generator A: -A has eigenvalues λ_k > 0.
/// V, H and V* collapse into one finite space and the dual pairing is the
/// Euclidean inner product.
class SpectralSpace {
 public:
  explicit SpectralSpace(std::vector<double> eigenvalues);

  static SpectralSpace scalar(double lambda = 1.0);
  /// λ_k = k²π², k = 1..dim.
  static SpectralSpace laplacian(int dim);

  /// {kind: "scalar"|"laplacian"|"explicit", dim, eigenvalues?}
  static SpectralSpace from_config(const nlohmann::json& config);
  nlohmann::json to_config() const;

  int dim() const noexcept { return static_cast<int>(eigenvalues_.size()); }
  std::span<const double> eigenvalues() const noexcept { return eigenvalues_; }
  double eigenvalue(int k) const { return eigenvalues_[k]; }
  /// min_k λ_k; ⟨Ax, x⟩ ≤ -β₁‖x‖² for every x.
  double beta1() const noexcept { return beta1_; }

  /// ⟨Ax, x⟩ = -Σ λ_k x_k².
  double pairing(std::span<const double> x) const;

  /// S_t x = (e^{-λ_k t} x_k). Throws InvalidTime for t < 0.
  StateVector apply_semigroup(double t, std::span<const double> x) const;
  /// In-place S_t.
  void apply_semigroup_inplace(double t, std::span<double> x) const;

  /// ‖(-A)^α x‖. α = 0 is accepted here and gives the plain norm; the
  /// checked entry point below enforces α ∈ (0, 1].
  double fractional_norm_unchecked(double alpha, std::span<const double> x) const;
  /// Throws InvalidExponent unless α ∈ (0, 1].
  double fractional_norm(double alpha, std::span<const double> x) const;

  /// ‖(-A)^α S_t‖ and its analytic majorant. Throws InvalidTime for t <= 0.
  SemigroupBound fractional_semigroup_bound(double alpha, double t) const;

 private:
  std::vector<double> eigenvalues_;
  double beta1_ = 0.0;
  std::string kind_ = "explicit";
};

/// (1 - e^{-λ t}) / λ, accurate for small λt.
double phi1(double lambda, double t);

}  // namespace levyavg
