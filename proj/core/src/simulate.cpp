#include "levyavg/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>

#include "levyavg/error.hpp"

namespace levyavg {
namespace {

std::atomic<std::uint64_t> g_frozen_runs{0};

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

/// Per-component exponential factors of one fast substep, cached on the
/// substep length because almost every substep has the same length.
class FastFactors {
 public:
  FastFactors(std::span<const double> lambda, double epsilon)
      : lambda_(lambda), eps_(epsilon), inv_sqrt_eps_(1.0 / std::sqrt(epsilon)),
        decay_(lambda.size()), phi_(lambda.size()), noise_(lambda.size()) {}

  void prepare(double du) {
    if (du == du_) return;
    du_ = du;
    const double tau = du / eps_;
    for (std::size_t k = 0; k < lambda_.size(); ++k) {
      decay_[k] = std::exp(-lambda_[k] * tau);
      phi_[k] = phi1(lambda_[k], tau);
      noise_[k] = decay_[k] * inv_sqrt_eps_;
    }
  }

  double decay(std::size_t k) const { return decay_[k]; }
  double phi(std::size_t k) const { return phi_[k]; }
  double noise(std::size_t k) const { return noise_[k]; }

 private:
  std::span<const double> lambda_;
  double eps_;
  double inv_sqrt_eps_;
  double du_ = -1.0;
  std::vector<double> decay_, phi_, noise_;
};

/// ∫ H(x, y, z) ν₂(dz); y is ignored when H does not depend on it.
double fast_compensator(const SlowFastModel& m, double x, double y) {
  if (m.nu2.empty()) return 0.0;
  const auto& H = m.coeffs.H;
  return m.nu2.integrate([&](double z) { return H(x, y, z); });
}

double slow_compensator(const SlowFastModel& m, double x) {
  if (m.nu1.empty()) return 0.0;
  const auto& h = m.coeffs.h;
  return m.nu1.integrate([&](double z) { return h(x, z); });
}

/// One exponential-Euler substep of the fast equation for component k.
inline double fast_update(const SlowFastModel& m, const FastFactors& ff, std::size_t k, double xa, double y,
                          double dw, double cached_comp) {
  const double comp = m.coeffs.H_depends_on_y ? fast_compensator(m, xa, y) : cached_comp;
  return ff.decay(k) * y + ff.phi(k) * (m.coeffs.F(xa, y) - comp) + ff.noise(k) * m.coeffs.G(xa, y) * dw;
}

void fill_cached_comp(const SlowFastModel& m, std::span<const double> x, std::vector<double>& out) {
  out.assign(x.size(), 0.0);
  if (m.coeffs.H_depends_on_y) return;
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = fast_compensator(m, x[k], 0.0);
}

void check_pairing(const SlowFastModel& model, const NoiseBundle& noise) {
  if (noise.slow.dim != model.dim()) throw Error(ErrorCode::kInvalidPairing, "noise dimension != model dimension");
  if (noise.fast.slow_positions.size() != noise.slow.timeline.size()) {
    throw Error(ErrorCode::kInvalidPairing, "fast noise was not generated for this slow noise");
  }
}

/// Slow update over [a, b] given the ETD-weighted drift accumulator.
void slow_update(const SlowFastModel& m, double delta, std::span<const double> xa, std::span<const double> drift,
                 const double* dw, std::span<double> out) {
  const auto lambda = m.space.eigenvalues();
  for (std::size_t k = 0; k < xa.size(); ++k) {
    const double decay = std::exp(-lambda[k] * delta);
    out[k] = decay * xa[k] + drift[k] - phi1(lambda[k], delta) * slow_compensator(m, xa[k]) +
             decay * m.coeffs.g(xa[k]) * dw[k];
  }
}

void apply_slow_jump(const SlowFastModel& m, double z, std::span<double> x) {
  for (double& v : x) v += m.coeffs.h(v, z);
}

void start_path(PathPair& p, const SlowNoise& slow, std::span<const double> x0) {
  p.dim = slow.dim;
  p.t = slow.timeline.t;
  p.regular = slow.timeline.regular;
  const std::size_t n = p.t.size();
  p.x.resize(n * p.dim);
  p.x_left.resize(n * p.dim);
  std::copy(x0.begin(), x0.end(), p.x.begin());
  std::copy(x0.begin(), x0.end(), p.x_left.begin());
  p.sup_norm_x = norm(x0);
  p.slow_fingerprint = fingerprint(slow);
}

}  // namespace

std::uint64_t frozen_run_count() { return g_frozen_runs.load(); }
void reset_frozen_run_count() { g_frozen_runs.store(0); }

double sup_distance(const PathPair& a, const PathPair& b, double power) {
  if (a.t != b.t || a.dim != b.dim) throw Error(ErrorCode::kInvalidPairing, "paths live on different timelines");
  double best = 0.0;
  for (std::size_t i = 0; i < a.nodes(); ++i) {
    double s = 0.0;
    for (int k = 0; k < a.dim; ++k) {
      const double d = a.x[i * a.dim + k] - b.x[i * b.dim + k];
      s += d * d;
    }
    best = std::max(best, std::pow(s, 0.5 * power));
  }
  return best;
}

PathPair simulate_coupled(const SlowFastModel& model, const NoiseBundle& noise) {
  model.validate();
  check_pairing(model, noise);
  const int d = model.dim();
  const auto lambda = model.space.eigenvalues();
  const auto& slow = noise.slow;
  const auto& fast = noise.fast;
  const auto& ft = fast.timeline;

  PathPair p;
  start_path(p, slow, model.x0);
  p.fast_fingerprint = fingerprint(fast);
  p.y.resize(p.t.size() * d);
  p.f_integral.assign(slow.timeline.pieces() * d, 0.0);
  std::copy(model.y0.begin(), model.y0.end(), p.y.begin());

  std::vector<double> x(model.x0), y(model.y0), drift(d), next(d), comp;
  FastFactors ff(lambda, fast.epsilon);
  const bool y_drift = model.coeffs.f_depends_on_y;

  for (std::size_t i = 0; i < slow.timeline.pieces(); ++i) {
    const double a = slow.timeline.t[i];
    const double b = slow.timeline.t[i + 1];
    std::fill(drift.begin(), drift.end(), 0.0);
    double* fint = p.f_integral.data() + i * d;
    fill_cached_comp(model, x, comp);

    for (std::size_t j = fast.slow_positions[i]; j < fast.slow_positions[i + 1]; ++j) {
      const double u = ft.t[j], v = ft.t[j + 1];
      const double du = v - u;
      ff.prepare(du);
      for (int k = 0; k < d; ++k) {
        if (y_drift) {
          const double fu = model.coeffs.f(x[k], y[k]);
          drift[k] += std::exp(-lambda[k] * (b - v)) * phi1(lambda[k], du) * fu;
          fint[k] += du * fu;
        }
        y[k] = fast_update(model, ff, k, x[k], y[k], fast.w2[j * d + k], comp[k]);
      }
      ++p.usage.w2_increments;
      if (const auto e = ft.fast_jump[j + 1]; e >= 0) {
        const double z = fast.n2.events[e].size;
        for (int k = 0; k < d; ++k) y[k] += model.coeffs.H(x[k], y[k], z);
        ++p.usage.n2_events;
      }
      if (!all_finite(y)) throw BlowUpError(v, a, x);
    }

    if (!y_drift) {
      // y-free drift: the substep weights telescope, so use the closed form
      for (int k = 0; k < d; ++k) {
        const double fa = model.coeffs.f(x[k], 0.0);
        drift[k] = phi1(lambda[k], b - a) * fa;
        fint[k] = (b - a) * fa;
      }
    }
    slow_update(model, b - a, x, drift, slow.w1.data() + i * d, next);
    ++p.usage.w1_increments;
    std::copy(next.begin(), next.end(), p.x_left.begin() + (i + 1) * d);
    if (const auto e = slow.timeline.jump[i + 1]; e >= 0) {
      apply_slow_jump(model, slow.n1.events[e].size, next);
      ++p.usage.n1_events;
    }
    if (!all_finite(next)) throw BlowUpError(b, a, x);
    x = next;
    std::copy(x.begin(), x.end(), p.x.begin() + (i + 1) * d);
    std::copy(y.begin(), y.end(), p.y.begin() + (i + 1) * d);
    p.sup_norm_x = std::max(p.sup_norm_x, norm(x));
  }
  p.usage.w1_increments *= d;
  p.usage.w2_increments *= d;
  return p;
}

FrozenPath simulate_frozen(const SlowFastModel& model, std::span<const double> x, std::span<const double> y0,
                           const FastNoise& noise) {
  const int d = model.dim();
  if (static_cast<int>(x.size()) != d || static_cast<int>(y0.size()) != d) {
    throw Error(ErrorCode::kInvalidConfig, "frozen state size != model dimension");
  }
  if (noise.epsilon != 1.0) throw Error(ErrorCode::kInvalidConfig, "frozen runs need noise generated with eps = 1");
  ++g_frozen_runs;
  const auto& ft = noise.timeline;
  FrozenPath out;
  out.dim = d;
  out.t = ft.t;
  out.y.resize(ft.size() * d);
  std::copy(y0.begin(), y0.end(), out.y.begin());
  std::vector<double> y(y0.begin(), y0.end()), comp;
  fill_cached_comp(model, x, comp);
  FastFactors ff(model.space.eigenvalues(), 1.0);
  for (std::size_t j = 0; j < ft.pieces(); ++j) {
    ff.prepare(ft.t[j + 1] - ft.t[j]);
    for (int k = 0; k < d; ++k) y[k] = fast_update(model, ff, k, x[k], y[k], noise.w2[j * d + k], comp[k]);
    if (const auto e = ft.fast_jump[j + 1]; e >= 0) {
      const double z = noise.n2.events[e].size;
      for (int k = 0; k < d; ++k) y[k] += model.coeffs.H(x[k], y[k], z);
    }
    if (!all_finite(y)) {
      throw BlowUpError(ft.t[j + 1], ft.t[j], std::vector<double>(out.y.begin() + j * d, out.y.begin() + (j + 1) * d));
    }
    std::copy(y.begin(), y.end(), out.y.begin() + (j + 1) * d);
  }
  return out;
}

void run_frozen(const SlowFastModel& model, std::span<const double> x, std::span<const double> y0, double horizon,
                double step, RandomStream& brownian, RandomStream& jumps,
                const std::function<void(double, double, std::span<const double>)>& on_piece) {
  if (!(horizon > 0.0)) throw Error(ErrorCode::kInvalidHorizon, "frozen horizon must be > 0");
  if (!(step > 0.0)) throw Error(ErrorCode::kInvalidGrid, "frozen step must be > 0");
  const int d = model.dim();
  if (static_cast<int>(x.size()) != d || static_cast<int>(y0.size()) != d) {
    throw Error(ErrorCode::kInvalidConfig, "frozen state size != model dimension");
  }
  ++g_frozen_runs;
  const std::size_t n = static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));
  const double rate = model.nu2.total_rate();
  double next_event = rate > 0.0 ? jumps.exponential(rate) : std::numeric_limits<double>::infinity();

  std::vector<double> y(y0.begin(), y0.end()), comp;
  fill_cached_comp(model, x, comp);
  FastFactors ff(model.space.eigenvalues(), 1.0);
  double u = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double target = k == n ? horizon : static_cast<double>(k) * step;
    while (u < target) {
      const bool event = next_event <= target;
      const double v = event ? next_event : target;
      if (v > u) {
        on_piece(u, v, y);
        const double du = v - u;
        ff.prepare(du);
        const double scale = std::sqrt(du);
        for (int c = 0; c < d; ++c) y[c] = fast_update(model, ff, c, x[c], y[c], scale * brownian.normal(), comp[c]);
      }
      if (event) {
        const double z = model.nu2.sample_size(jumps);
        for (int c = 0; c < d; ++c) y[c] += model.coeffs.H(x[c], y[c], z);
        next_event += jumps.exponential(rate);
      }
      if (!all_finite(y)) throw BlowUpError(v, u, std::vector<double>(x.begin(), x.end()));
      u = v;
    }
  }
}

PathPair simulate_reduced(const SlowFastModel& model, const FbarMap& fbar, const SlowNoise& noise,
                          ReducedOptions options) {
  model.validate();
  if (noise.dim != model.dim()) throw Error(ErrorCode::kInvalidPairing, "noise dimension != model dimension");
  const int d = model.dim();
  const auto lambda = model.space.eigenvalues();
  PathPair p;
  start_path(p, noise, model.x0);
  std::vector<double> x(model.x0), drift(d), next(d);
  for (std::size_t i = 0; i < noise.timeline.pieces(); ++i) {
    const double a = noise.timeline.t[i];
    const double b = noise.timeline.t[i + 1];
    for (int k = 0; k < d; ++k) {
      if (!fbar.contains(k, x[k])) {
        if (options.strict_domain) {
          throw Error(ErrorCode::kDomainExceeded,
                      "f-bar queried at x[" + std::to_string(k) + "]=" + std::to_string(x[k]) + ", t=" + std::to_string(a));
        }
        ++p.domain_exceeded;
      }
      drift[k] = phi1(lambda[k], b - a) * fbar.value(k, x[k]);
    }
    slow_update(model, b - a, x, drift, noise.w1.data() + i * d, next);
    ++p.usage.w1_increments;
    std::copy(next.begin(), next.end(), p.x_left.begin() + (i + 1) * d);
    if (const auto e = noise.timeline.jump[i + 1]; e >= 0) {
      apply_slow_jump(model, noise.n1.events[e].size, next);
      ++p.usage.n1_events;
    }
    if (!all_finite(next)) throw BlowUpError(b, a, x);
    x = next;
    std::copy(x.begin(), x.end(), p.x.begin() + (i + 1) * d);
    p.sup_norm_x = std::max(p.sup_norm_x, norm(x));
  }
  p.usage.w1_increments *= d;
  return p;
}

AuxiliaryPath simulate_auxiliary(const SlowFastModel& model, double delta, const NoiseBundle& noise,
                                 const PathPair& coupled) {
  model.validate();
  check_pairing(model, noise);
  if (coupled.slow_fingerprint != fingerprint(noise.slow) || coupled.fast_fingerprint != fingerprint(noise.fast)) {
    throw Error(ErrorCode::kInvalidPairing, "coupled path was not produced from this noise");
  }
  const double h = noise.grid.h();
  const double T = noise.grid.horizon;
  if (!(delta > 0.0)) throw Error(ErrorCode::kInvalidBlock, "block length must be > 0");
  std::size_t m;
  if (delta >= T) {
    m = noise.grid.n_slow;
  } else {
    const double ratio = delta / h;
    const double r = std::round(ratio);
    if (r < 1.0 || std::abs(ratio - r) > 1e-9 * ratio) {
      throw Error(ErrorCode::kInvalidBlock, "block length " + std::to_string(delta) + " is not a multiple of h");
    }
    m = static_cast<std::size_t>(r);
  }

  const int d = model.dim();
  const auto lambda = model.space.eigenvalues();
  const auto& slow = noise.slow;
  const auto& fast = noise.fast;
  const auto& ft = fast.timeline;
  const auto& f = model.coeffs.f;

  AuxiliaryPath out;
  out.dim = d;
  out.delta = delta;
  out.block_steps = m;
  out.t = slow.timeline.t;
  out.regular = slow.timeline.regular;
  const std::size_t nodes = out.t.size();
  out.x_hat.resize(nodes * d);
  out.y_hat.resize(nodes * d);

  // regular node index of every slow-timeline node, or npos
  std::vector<std::size_t> regular_index(nodes, static_cast<std::size_t>(-1));
  for (std::size_t k = 0; k < out.regular.size(); ++k) regular_index[out.regular[k]] = k;

  std::vector<double> y(model.y0), yhat(model.y0), xblock(model.x0), gap(d, 0.0), comp, comp_hat;
  FastFactors ff(lambda, fast.epsilon);
  std::copy(model.y0.begin(), model.y0.end(), out.y_hat.begin());
  std::copy(model.x0.begin(), model.x0.end(), out.x_hat.begin());

  for (std::size_t i = 0; i < slow.timeline.pieces(); ++i) {
    const auto xa = coupled.x_at(i);
    if (regular_index[i] != static_cast<std::size_t>(-1) && regular_index[i] % m == 0) {
      std::copy(xa.begin(), xa.end(), xblock.begin());
      yhat = y;
    }
    fill_cached_comp(model, xa, comp);
    fill_cached_comp(model, xblock, comp_hat);
    for (std::size_t j = fast.slow_positions[i]; j < fast.slow_positions[i + 1]; ++j) {
      const double du = ft.t[j + 1] - ft.t[j];
      ff.prepare(du);
      for (int k = 0; k < d; ++k) {
        gap[k] += du * (f(xblock[k], yhat[k]) - f(xa[k], y[k]));
        const double dw = fast.w2[j * d + k];
        y[k] = fast_update(model, ff, k, xa[k], y[k], dw, comp[k]);
        yhat[k] = fast_update(model, ff, k, xblock[k], yhat[k], dw, comp_hat[k]);
      }
      if (const auto e = ft.fast_jump[j + 1]; e >= 0) {
        const double z = fast.n2.events[e].size;
        for (int k = 0; k < d; ++k) {
          y[k] += model.coeffs.H(xa[k], y[k], z);
          yhat[k] += model.coeffs.H(xblock[k], yhat[k], z);
        }
      }
      if (!all_finite(yhat)) throw BlowUpError(ft.t[j + 1], ft.t[j], xblock);
    }
    const auto ystored = coupled.y_at(i + 1);
    for (int k = 0; k < d; ++k) {
      if (std::abs(y[k] - ystored[k]) > 1e-9 * (1.0 + std::abs(ystored[k]))) {
        throw Error(ErrorCode::kInvalidPairing, "recomputed fast path departs from the coupled path");
      }
      out.x_hat[(i + 1) * d + k] = coupled.x[(i + 1) * d + k] + gap[k];
      out.y_hat[(i + 1) * d + k] = yhat[k];
    }
  }
  return out;
}

std::vector<double> energy_residual(const PathPair& path, const SlowFastModel& model, const NoiseBundle& noise,
                                    int p) {
  if (p < 1) throw Error(ErrorCode::kInvalidExponent, "energy identity needs p >= 1");
  if (path.slow_fingerprint != fingerprint(noise.slow) || path.dim != model.dim() ||
      path.t != noise.slow.timeline.t || path.f_integral.size() != noise.slow.timeline.pieces() * path.dim) {
    throw Error(ErrorCode::kInvalidPairing, "path and noise come from different runs");
  }
  const int d = path.dim;
  const auto lambda = model.space.eigenvalues();
  const auto& slow = noise.slow;
  auto pow_norm = [p](double sq) { return std::pow(sq, p); };  // ‖x‖^{2p} from ‖x‖²

  std::vector<double> residual(path.nodes(), 0.0);
  std::vector<double> sx(d);
  for (std::size_t i = 0; i + 1 < path.nodes(); ++i) {
    const double delta = path.t[i + 1] - path.t[i];
    const auto xa = path.x_at(i);
    const std::span<const double> xl(path.x_left.data() + (i + 1) * d, d);
    const auto xb = path.x_at(i + 1);
    const double* dw = slow.w1.data() + i * d;
    const double* fint = path.f_integral.data() + i * d;

    const double na2 = squared_norm(xa);
    const double na_2p2 = p == 1 ? 1.0 : std::pow(na2, p - 1);  // ‖X_a‖^{2p-2}
    for (int k = 0; k < d; ++k) sx[k] = std::exp(-lambda[k] * delta) * xa[k];

    double f_pair = 0.0, g_pair = 0.0, g_sq = 0.0, comp_pair = 0.0;
    for (int k = 0; k < d; ++k) {
      const double gk = model.coeffs.g(xa[k]);
      f_pair += fint[k] * xa[k];
      g_pair += gk * dw[k] * xa[k];
      g_sq += gk * gk * dw[k] * dw[k];
      if (!model.nu1.empty()) comp_pair += slow_compensator(model, xa[k]) * xa[k];
    }
    double ito = p * na_2p2 * g_sq;
    if (p >= 2) ito += 2.0 * p * (p - 1) * (p == 2 ? 1.0 : std::pow(na2, p - 2)) * g_pair * g_pair;

    const double lhs_continuous = pow_norm(squared_norm(xl)) - pow_norm(na2);
    const double rhs_continuous = (pow_norm(squared_norm(sx)) - pow_norm(na2)) + 2.0 * p * na_2p2 * f_pair +
                                  2.0 * p * na_2p2 * g_pair + ito - 2.0 * p * na_2p2 * comp_pair * delta;

    double jump_residual = 0.0;
    if (const auto e = slow.timeline.jump[i + 1]; e >= 0) {
      const double z = slow.n1.events[e].size;
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        const double v = xl[k] + model.coeffs.h(xl[k], z);
        s += v * v;
      }
      const double rhs_jump = pow_norm(s) - pow_norm(squared_norm(xl));
      const double lhs_jump = pow_norm(squared_norm(xb)) - pow_norm(squared_norm(xl));
      jump_residual = lhs_jump - rhs_jump;
    }
    residual[i + 1] = residual[i] + (lhs_continuous - rhs_continuous) + jump_residual;
  }
  return residual;
}

void write_trajectory_csv(const std::filesystem::path& file, const PathPair& path) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::kInvalidConfig, "cannot write " + file.string());
  out.precision(17);
  out << "t";
  for (int k = 1; k <= path.dim; ++k) out << ",X_" << k;
  const bool has_y = !path.y.empty();
  if (has_y) {
    for (int k = 1; k <= path.dim; ++k) out << ",Y_" << k;
  }
  out << '\n';
  for (std::size_t i = 0; i < path.nodes(); ++i) {
    out << path.t[i];
    for (int k = 0; k < path.dim; ++k) out << ',' << path.x[i * path.dim + k];
    if (has_y) {
      for (int k = 0; k < path.dim; ++k) out << ',' << path.y[i * path.dim + k];
    }
    out << '\n';
  }
}

}  // namespace levyavg
