#include "levyavg/spectral_space.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "levyavg/error.hpp"

namespace levyavg {

double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double norm(std::span<const double> x) { return std::sqrt(squared_norm(x)); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double phi1(double lambda, double t) {
  const double a = lambda * t;
  if (a == 0.0) return t;
  return -std::expm1(-a) / lambda;
}

SpectralSpace::SpectralSpace(std::vector<double> eigenvalues) : eigenvalues_(std::move(eigenvalues)) {
  if (eigenvalues_.empty()) throw Error(ErrorCode::kInvalidConfig, "spectral space needs dim >= 1");
  for (double l : eigenvalues_) {
    if (!(l > 0.0) || !std::isfinite(l)) throw Error(ErrorCode::kInvalidConfig, "eigenvalues of -A must be positive");
  }
  beta1_ = *std::min_element(eigenvalues_.begin(), eigenvalues_.end());
}

SpectralSpace SpectralSpace::scalar(double lambda) {
  SpectralSpace s({lambda});
  s.kind_ = "scalar";
  return s;
}

SpectralSpace SpectralSpace::laplacian(int dim) {
  if (dim < 1) throw Error(ErrorCode::kInvalidConfig, "laplacian preset needs dim >= 1");
  std::vector<double> ev(dim);
  for (int k = 1; k <= dim; ++k) ev[k - 1] = k * k * std::numbers::pi * std::numbers::pi;
  SpectralSpace s(std::move(ev));
  s.kind_ = "laplacian";
  return s;
}

SpectralSpace SpectralSpace::from_config(const nlohmann::json& config) {
  try {
    const std::string kind = config.value("kind", "scalar");
    if (kind == "scalar") {
      if (config.contains("eigenvalues")) return scalar(config.at("eigenvalues").at(0).get<double>());
      return scalar(config.value("lambda", 1.0));
    }
    if (kind == "laplacian") return laplacian(config.at("dim").get<int>());
    if (kind == "explicit") {
      auto ev = config.at("eigenvalues").get<std::vector<double>>();
      if (config.contains("dim") && config.at("dim").get<std::size_t>() != ev.size())
        throw Error(ErrorCode::kInvalidConfig, "dim does not match eigenvalue count");
      return SpectralSpace(std::move(ev));
    }
    throw Error(ErrorCode::kInvalidConfig, "unknown space kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("space config: ") + e.what());
  }
}

nlohmann::json SpectralSpace::to_config() const {
  nlohmann::json out{{"kind", kind_}, {"dim", dim()}};
  if (kind_ == "scalar") out["lambda"] = eigenvalues_[0];
  if (kind_ == "explicit") out["eigenvalues"] = eigenvalues_;
  return out;
}

double SpectralSpace::pairing(std::span<const double> x) const {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s -= eigenvalues_[k] * x[k] * x[k];
  return s;
}

StateVector SpectralSpace::apply_semigroup(double t, std::span<const double> x) const {
  StateVector out(x.begin(), x.end());
  apply_semigroup_inplace(t, out);
  return out;
}

void SpectralSpace::apply_semigroup_inplace(double t, std::span<double> x) const {
  if (!(t >= 0.0)) throw Error(ErrorCode::kInvalidTime, "semigroup time must be >= 0");
  if (t == 0.0) return;
  for (std::size_t k = 0; k < x.size(); ++k) x[k] *= std::exp(-eigenvalues_[k] * t);
}

double SpectralSpace::fractional_norm_unchecked(double alpha, std::span<const double> x) const {
  if (alpha == 0.0) return norm(x);
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double w = std::pow(eigenvalues_[k], alpha) * x[k];
    s += w * w;
  }
  return std::sqrt(s);
}

double SpectralSpace::fractional_norm(double alpha, std::span<const double> x) const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidExponent, "alpha must lie in (0, 1]");
  return fractional_norm_unchecked(alpha, x);
}

SemigroupBound SpectralSpace::fractional_semigroup_bound(double alpha, double t) const {
  if (!(t > 0.0)) throw Error(ErrorCode::kInvalidTime, "bound needs t > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kInvalidExponent, "alpha must lie in (0, 1]");
  SemigroupBound out;
  for (double l : eigenvalues_) out.operator_norm = std::max(out.operator_norm, std::pow(l, alpha) * std::exp(-l * t));
  // sup_λ λ^α e^{-λt} is attained at λ = α/t.
  out.bound = std::pow(alpha / std::numbers::e, alpha) * std::pow(t, -alpha);
  return out;
}

}  // namespace levyavg
