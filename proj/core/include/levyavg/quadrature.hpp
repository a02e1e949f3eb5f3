#pragma once

#include <vector>

namespace levyavg {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1], nodes ascending. Computed once
/// per n by Newton iteration on P_n and cached.
const QuadratureRule& gauss_legendre(int n);

inline constexpr int kDensityQuadratureNodes = 64;

}  // namespace levyavg
