#include "levyavg/levy_noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "levyavg/error.hpp"
#include "levyavg/quadrature.hpp"

namespace levyavg {
namespace {

void require_cutoff(double cutoff) {
  if (std::isnan(cutoff) || cutoff < 0.0) {
    throw Error(ErrorCode::kUnsupportedMeasure, "cutoff must lie in [0, inf]");
  }
}

double abs_power_integral(double lo, double hi, int q) {
  // ∫_lo^hi |z|^q dz
  const double e = q + 1.0;
  if (lo >= 0.0) return (std::pow(hi, e) - std::pow(lo, e)) / e;
  if (hi <= 0.0) return (std::pow(-lo, e) - std::pow(-hi, e)) / e;
  return (std::pow(-lo, e) + std::pow(hi, e)) / e;
}

/// ∫ φ dν with every density bin additionally split at `breaks`, so that
/// integrands with jumps at those points are integrated exactly.
template <class Fn>
auto integrate_split(const JumpMeasure& measure, std::span<const double> breaks, Fn&& phi) {
  using Value = decltype(phi(0.0));
  Value total{};
  for (const auto& atom : measure.atom_list()) total += atom.mass * phi(atom.size);
  const auto& rule = gauss_legendre(kDensityQuadratureNodes);
  for (const auto& bin : measure.bin_list()) {
    std::vector<double> cuts{bin.lo};
    for (double b : breaks) {
      if (b > bin.lo && b < bin.hi) cuts.push_back(b);
    }
    cuts.push_back(bin.hi);
    std::sort(cuts.begin(), cuts.end());
    const double density = bin.mass / (bin.hi - bin.lo);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      const double half = 0.5 * (cuts[s + 1] - cuts[s]);
      const double mid = 0.5 * (cuts[s + 1] + cuts[s]);
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        total += density * half * rule.weights[i] * phi(mid + half * rule.nodes[i]);
      }
    }
  }
  return total;
}

double indicator(const LevyTriplet& triplet, double z) {
  return triplet.indicator == SmallJumpIndicator::kOneSided ? (z < 1.0 ? 1.0 : 0.0)
                                                            : (std::abs(z) < 1.0 ? 1.0 : 0.0);
}

}  // namespace

JumpMeasure JumpMeasure::none(double cutoff) {
  require_cutoff(cutoff);
  JumpMeasure m;
  m.kind_ = MeasureKind::kAtoms;
  m.cutoff_ = cutoff;
  m.finalize();
  return m;
}

JumpMeasure JumpMeasure::atoms(std::vector<JumpAtom> atoms, double cutoff) {
  return mixed(std::move(atoms), {}, cutoff);
}

JumpMeasure JumpMeasure::uniform(double rate, double lo, double hi, double cutoff) {
  JumpMeasure m = table({{lo, hi, rate}}, cutoff);
  m.kind_ = MeasureKind::kUniform;
  return m;
}

JumpMeasure JumpMeasure::table(std::vector<JumpBin> bins, double cutoff) {
  return mixed({}, std::move(bins), cutoff);
}

JumpMeasure JumpMeasure::mixed(std::vector<JumpAtom> atoms, std::vector<JumpBin> bins, double cutoff) {
  require_cutoff(cutoff);
  for (const auto& a : atoms) {
    if (!std::isfinite(a.size) || !std::isfinite(a.mass) || a.mass < 0.0) {
      throw Error(ErrorCode::kUnsupportedMeasure, "atom sizes and masses must be finite, mass >= 0");
    }
    if (!(std::abs(a.size) < cutoff)) {
      throw Error(ErrorCode::kUnsupportedMeasure, "atom outside |z| < cutoff");
    }
  }
  for (const auto& b : bins) {
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi) || !std::isfinite(b.mass) ||
        b.mass < 0.0) {
      throw Error(ErrorCode::kUnsupportedMeasure, "bins need finite lo < hi and mass >= 0");
    }
    if (b.lo < -cutoff || b.hi > cutoff) {
      throw Error(ErrorCode::kUnsupportedMeasure, "bin outside |z| < cutoff");
    }
  }
  std::erase_if(atoms, [](const JumpAtom& a) { return a.mass == 0.0; });
  std::erase_if(bins, [](const JumpBin& b) { return b.mass == 0.0; });
  JumpMeasure m;
  m.kind_ = bins.empty() ? MeasureKind::kAtoms : MeasureKind::kTable;
  m.cutoff_ = cutoff;
  m.atoms_ = std::move(atoms);
  m.bins_ = std::move(bins);
  m.finalize();
  return m;
}

void JumpMeasure::finalize() {
  cumulative_.clear();
  quad_nodes_.clear();
  quad_weights_.clear();
  double running = 0.0;
  for (const auto& a : atoms_) {
    running += a.mass;
    cumulative_.push_back(running);
    quad_nodes_.push_back(a.size);
    quad_weights_.push_back(a.mass);
  }
  const auto& rule = gauss_legendre(kDensityQuadratureNodes);
  for (const auto& b : bins_) {
    running += b.mass;
    cumulative_.push_back(running);
    const double half = 0.5 * (b.hi - b.lo);
    const double mid = 0.5 * (b.hi + b.lo);
    const double density = b.mass / (b.hi - b.lo);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      quad_nodes_.push_back(mid + half * rule.nodes[i]);
      quad_weights_.push_back(density * half * rule.weights[i]);
    }
  }
  total_rate_ = running;
  if (!std::isfinite(total_rate_)) {
    throw Error(ErrorCode::kUnsupportedMeasure, "jump measure must have finite total mass");
  }
}

double JumpMeasure::sample_size(RandomStream& stream) const {
  if (total_rate_ <= 0.0) throw Error(ErrorCode::kUnsupportedMeasure, "sampling from a null measure");
  const double target = stream.uniform() * total_rate_;
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  std::size_t index = it == cumulative_.end() ? cumulative_.size() - 1
                                              : static_cast<std::size_t>(it - cumulative_.begin());
  if (index < atoms_.size()) return atoms_[index].size;
  const JumpBin& bin = bins_[index - atoms_.size()];
  double z = bin.lo + stream.uniform_open() * (bin.hi - bin.lo);
  if (z >= bin.hi) z = std::nextafter(bin.hi, bin.lo);
  if (z <= bin.lo) z = std::nextafter(bin.lo, bin.hi);
  return z;
}

double JumpMeasure::moment(int q) const {
  if (q < 0) throw Error(ErrorCode::kNumericError, "moment order must be >= 0");
  double total = 0.0;
  for (const auto& a : atoms_) total += a.mass * std::pow(std::abs(a.size), q);
  for (const auto& b : bins_) total += b.mass / (b.hi - b.lo) * abs_power_integral(b.lo, b.hi, q);
  return total;
}

JumpMeasure JumpMeasure::from_config(const nlohmann::json& config) {
  if (!config.is_object()) throw Error(ErrorCode::kInvalidConfig, "jump measure config must be an object");
  const std::string kind = config.value("kind", "none");
  double cutoff = kInfiniteCutoff;
  if (config.contains("cutoff_c") && !config.at("cutoff_c").is_null()) {
    const auto& c = config.at("cutoff_c");
    cutoff = c.is_string() && c.get<std::string>() == "inf" ? kInfiniteCutoff : c.get<double>();
  }
  const double rate = config.value("rate", 0.0);
  const nlohmann::json params = config.value("params", nlohmann::json::object());
  if (kind == "none" || rate == 0.0) return none(cutoff);
  if (kind == "uniform") {
    return uniform(rate, params.at("lo").get<double>(), params.at("hi").get<double>(), cutoff);
  }
  if (kind == "atoms") {
    const auto sizes = params.at("sizes").get<std::vector<double>>();
    std::vector<double> weights = params.contains("weights") ? params.at("weights").get<std::vector<double>>()
                                                             : std::vector<double>(sizes.size(), 1.0);
    if (weights.size() != sizes.size() || sizes.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "atoms: sizes and weights must be non-empty and equal length");
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<JumpAtom> atoms;
    for (std::size_t i = 0; i < sizes.size(); ++i) atoms.push_back({sizes[i], rate * weights[i] / total});
    return JumpMeasure::atoms(std::move(atoms), cutoff);
  }
  if (kind == "table") {
    const auto edges = params.at("edges").get<std::vector<double>>();
    const auto weights = params.at("weights").get<std::vector<double>>();
    if (edges.size() != weights.size() + 1 || weights.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "table: need len(edges) == len(weights) + 1");
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<JumpBin> bins;
    for (std::size_t i = 0; i < weights.size(); ++i) bins.push_back({edges[i], edges[i + 1], rate * weights[i] / total});
    return JumpMeasure::table(std::move(bins), cutoff);
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown jump measure kind '" + kind + "'");
}

nlohmann::json JumpMeasure::to_config() const {
  nlohmann::json out;
  out["rate"] = total_rate_;
  out["cutoff_c"] = std::isinf(cutoff_) ? nlohmann::json("inf") : nlohmann::json(cutoff_);
  if (empty()) {
    out["kind"] = "none";
    out["params"] = nlohmann::json::object();
    return out;
  }
  if (kind_ == MeasureKind::kUniform && bins_.size() == 1) {
    out["kind"] = "uniform";
    out["params"] = {{"lo", bins_[0].lo}, {"hi", bins_[0].hi}};
  } else if (bins_.empty()) {
    out["kind"] = "atoms";
    std::vector<double> sizes, weights;
    for (const auto& a : atoms_) {
      sizes.push_back(a.size);
      weights.push_back(a.mass / total_rate_);
    }
    out["params"] = {{"sizes", sizes}, {"weights", weights}};
  } else {
    if (!atoms_.empty()) throw Error(ErrorCode::kInvalidConfig, "mixed atom/density measures have no config form");
    out["kind"] = "table";
    std::vector<double> edges{bins_.front().lo}, weights;
    for (const auto& b : bins_) {
      if (b.lo > edges.back()) {
        // gap between bins: zero-weight filler
        edges.push_back(b.lo);
        weights.push_back(0.0);
      }
      edges.push_back(b.hi);
      weights.push_back(b.mass / total_rate_);
    }
    out["params"] = {{"edges", edges}, {"weights", weights}};
  }
  return out;
}

void LevyTriplet::validate() const {
  if (!std::isfinite(drift)) throw Error(ErrorCode::kUnsupportedMeasure, "drift must be finite");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::kUnsupportedMeasure, "sigma must be >= 0");
  require_cutoff(cutoff);
  if (std::isinf(cutoff)) throw Error(ErrorCode::kUnsupportedMeasure, "decomposition cutoff must be finite");
}

std::complex<double> characteristic_exponent(const LevyTriplet& triplet, double theta) {
  triplet.validate();
  if (!std::isfinite(theta)) throw Error(ErrorCode::kNumericError, "theta must be finite");
  const std::complex<double> i(0.0, 1.0);
  const double breaks[] = {-1.0, 1.0};
  const std::complex<double> jump_part = integrate_split(triplet.measure, breaks, [&](double z) {
    return std::exp(i * theta * z) - 1.0 - i * theta * z * indicator(triplet, z);
  });
  const std::complex<double> psi =
      i * triplet.drift * theta - 0.5 * triplet.sigma * triplet.sigma * theta * theta + jump_part;
  if (!std::isfinite(psi.real()) || !std::isfinite(psi.imag())) {
    throw Error(ErrorCode::kNumericError, "characteristic exponent overflow");
  }
  return psi;
}

std::complex<double> characteristic_function(const LevyTriplet& triplet, double theta) {
  const auto value = std::exp(characteristic_exponent(triplet, theta));
  if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
    throw Error(ErrorCode::kNumericError, "characteristic function overflow");
  }
  return value;
}

CfComparison compare_characteristic_function(const LevyTriplet& triplet, std::span<const double> thetas,
                                             std::size_t n, RandomStream& stream) {
  if (n == 0) throw Error(ErrorCode::kInvalidConfig, "need at least one increment");
  const std::vector<double> sample = sample_increments(triplet_to_components(triplet), 1.0, n, stream);
  CfComparison out;
  for (double theta : thetas) {
    double re = 0.0, im = 0.0;
    for (double v : sample) {
      re += std::cos(theta * v);
      im += std::sin(theta * v);
    }
    const std::complex<double> emp(re / static_cast<double>(n), im / static_cast<double>(n));
    const std::complex<double> ana = characteristic_function(triplet, theta);
    out.theta.push_back(theta);
    out.empirical.push_back(emp);
    out.analytic.push_back(ana);
    out.max_error = std::max(out.max_error, std::abs(emp - ana));
  }
  return out;
}

LevyComponents triplet_to_components(const LevyTriplet& triplet) {
  triplet.validate();
  const double c = triplet.cutoff;
  const JumpMeasure& nu = triplet.measure;

  std::vector<JumpAtom> small_atoms, large_atoms;
  for (const auto& a : nu.atom_list()) (std::abs(a.size) < c ? small_atoms : large_atoms).push_back(a);
  std::vector<JumpBin> small_bins, large_bins;
  for (const auto& b : nu.bin_list()) {
    const double density = b.mass / (b.hi - b.lo);
    auto push = [&](std::vector<JumpBin>& out, double lo, double hi) {
      if (hi > lo) out.push_back({lo, hi, density * (hi - lo)});
    };
    push(large_bins, b.lo, std::min(b.hi, -c));
    push(small_bins, std::max(b.lo, -c), std::min(b.hi, c));
    push(large_bins, std::max(b.lo, c), b.hi);
  }

  LevyComponents out;
  out.sigma = triplet.sigma;
  out.small = JumpMeasure::mixed(std::move(small_atoms), std::move(small_bins), c);
  out.large = JumpMeasure::mixed(std::move(large_atoms), std::move(large_bins));
  if (!std::isfinite(out.small.moment(2)) || !std::isfinite(out.large.total_rate())) {
    throw Error(ErrorCode::kUnsupportedMeasure, "moment integrals diverge for this cutoff");
  }

  // b1 = E[L(1) - Σ large jumps] = ϱ + ∫ z (1 - 1_small-indicator(z) - 1_{|z|>=c}) ν(dz)
  const double breaks[] = {-1.0, 1.0, -c, c};
  const double correction = integrate_split(nu, breaks, [&](double z) {
    const double large = std::abs(z) >= c ? 1.0 : 0.0;
    return z * (1.0 - indicator(triplet, z) - large);
  });
  out.b1 = triplet.drift + correction;
  return out;
}

std::vector<double> sample_increments(const LevyComponents& components, double dt, std::size_t n,
                                      RandomStream& stream) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidHorizon, "increment length must be > 0");
  const double small_rate = components.small.total_rate();
  const double large_rate = components.large.total_rate();
  const double small_mean = components.small.integrate([](double z) { return z; });
  const double sqrt_dt = std::sqrt(dt);
  std::vector<double> out(n);
  for (auto& value : out) {
    double x = components.b1 * dt + components.sigma * sqrt_dt * stream.normal() - dt * small_mean;
    if (small_rate > 0.0) {
      for (double t = stream.exponential(small_rate); t <= dt; t += stream.exponential(small_rate)) {
        x += components.small.sample_size(stream);
      }
    }
    if (large_rate > 0.0) {
      for (double t = stream.exponential(large_rate); t <= dt; t += stream.exponential(large_rate)) {
        x += components.large.sample_size(stream);
      }
    }
    value = x;
  }
  return out;
}

void JumpEventList::validate(double cutoff) const {
  double last = -1.0;
  for (const auto& e : events) {
    if (!(e.time > last) || e.time < 0.0 || e.time > horizon) {
      throw Error(ErrorCode::kInvalidGrid, "jump times must be strictly increasing within [0, T]");
    }
    if (!(std::abs(e.size) < cutoff)) throw Error(ErrorCode::kInvalidGrid, "jump size outside |z| < c");
    last = e.time;
  }
}

std::vector<double> sample_brownian(std::span<const double> grid, int dim, RandomStream& stream) {
  if (dim < 1) throw Error(ErrorCode::kInvalidGrid, "Brownian dimension must be >= 1");
  if (grid.size() < 2) return {};
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || !std::isfinite(grid[i + 1]) || !(grid[i + 1] > grid[i])) {
      throw Error(ErrorCode::kInvalidGrid, "grid must be finite and strictly increasing");
    }
  }
  std::vector<double> increments((grid.size() - 1) * static_cast<std::size_t>(dim));
  for (std::size_t cell = 0; cell + 1 < grid.size(); ++cell) {
    const double scale = std::sqrt(grid[cell + 1] - grid[cell]);
    for (int k = 0; k < dim; ++k) increments[cell * dim + k] = scale * stream.normal();
  }
  return increments;
}

JumpEventList sample_jump_events(const JumpMeasure& measure, double horizon, double intensity_scale,
                                 RandomStream& stream) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw Error(ErrorCode::kInvalidHorizon, "horizon must be finite and >= 0");
  }
  if (!(intensity_scale >= 0.0) || !std::isfinite(intensity_scale)) {
    throw Error(ErrorCode::kInvalidConfig, "intensity scale must be finite and >= 0");
  }
  JumpEventList list;
  list.horizon = horizon;
  const double rate = measure.total_rate() * intensity_scale;
  if (rate == 0.0) return list;
  double t = stream.exponential(rate);
  while (t <= horizon) {
    if (!list.events.empty() && t <= list.events.back().time) {
      t = std::nextafter(list.events.back().time, horizon + 1.0);
      if (t > horizon) break;
    }
    list.events.push_back({t, measure.sample_size(stream)});
    t += stream.exponential(rate);
  }
  return list;
}

std::vector<double> compensated_integral(const JumpEventList& events, const JumpMeasure& measure,
                                         const std::function<double(double, double)>& integrand,
                                         std::span<const double> path, std::span<const double> grid,
                                         double intensity_scale) {
  if (grid.size() < 2) return {};
  if (path.size() + 1 != grid.size()) {
    throw Error(ErrorCode::kInvalidGrid, "path needs one state per grid cell");
  }
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (!(grid[i + 1] > grid[i])) throw Error(ErrorCode::kInvalidGrid, "grid must be strictly increasing");
  }
  auto eval = [&](double state, double z) {
    double value;
    try {
      value = integrand(state, z);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kCoefficientError, std::string("integrand failed: ") + e.what());
    }
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::kCoefficientError,
                  "integrand non-finite at state=" + std::to_string(state) + " z=" + std::to_string(z));
    }
    return value;
  };

  const std::size_t cells = grid.size() - 1;
  std::vector<double> out(cells, 0.0);
  std::size_t e = 0;
  for (std::size_t i = 0; i < cells; ++i) {
    const bool last = i + 1 == cells;
    double jumps = 0.0;
    while (e < events.events.size() &&
           (events.events[e].time < grid[i + 1] || (last && events.events[e].time <= grid[i + 1]))) {
      if (events.events[e].time >= grid[i]) jumps += eval(path[i], events.events[e].size);
      ++e;
    }
    const double compensator =
        intensity_scale * (grid[i + 1] - grid[i]) * measure.integrate([&](double z) { return eval(path[i], z); });
    out[i] = jumps - compensator;
  }
  return out;
}

}  // namespace levyavg
