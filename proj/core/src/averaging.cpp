#include "levyavg/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "levyavg/error.hpp"
#include "levyavg/parallel.hpp"
#include "levyavg/stats.hpp"

namespace levyavg {
namespace {

constexpr std::uint64_t kMixingTag = 0x6d6978696e67ULL;

StateVector resolve_y0(const SlowFastModel& model, const FbarConfig& cfg) {
  StateVector y0 = cfg.y0 ? *cfg.y0 : model.y0;
  if (y0.size() == 1 && model.dim() > 1) y0.assign(model.dim(), y0[0]);
  if (static_cast<int>(y0.size()) != model.dim()) throw Error(ErrorCode::kInvalidConfig, "y0 size != model dimension");
  return y0;
}

void check_config(const FbarConfig& cfg) {
  if (!(cfg.horizon > 0.0)) throw Error(ErrorCode::kInvalidHorizon, "averaging horizon must be > 0");
  if (cfg.replicas < 1) throw Error(ErrorCode::kInvalidConfig, "need at least one replica");
  if (!(cfg.step > 0.0)) throw Error(ErrorCode::kInvalidGrid, "frozen step must be > 0");
}

/// Per-component time averages of f(x, Y), Y and Y² over [T_b, T_b + T_a]
/// for replica r.
struct ReplicaAverages {
  std::vector<RunningMean> f, y, y2;
};

ReplicaAverages replica_run(const SlowFastModel& model, std::span<const double> x, std::span<const double> y0,
                            double burn_in, const FbarConfig& cfg, std::uint32_t r, bool moments) {
  const int d = model.dim();
  ReplicaAverages out;
  out.f.resize(d);
  if (moments) {
    out.y.resize(d);
    out.y2.resize(d);
  }
  RandomStream brownian(cfg.seed, StreamKind::kFrozen, 2 * r);
  RandomStream jumps(cfg.seed, StreamKind::kFrozen, 2 * r + 1);
  const double end = burn_in + cfg.horizon;
  const auto& f = model.coeffs.f;
  run_frozen(model, x, y0, end, cfg.step, brownian, jumps, [&](double u, double v, std::span<const double> y) {
    const double w = std::min(v, end) - std::max(u, burn_in);
    if (w <= 0.0) return;
    for (int k = 0; k < d; ++k) {
      out.f[k].add(f(x[k], y[k]), w);
      if (moments) {
        out.y[k].add(y[k], w);
        out.y2[k].add(y[k] * y[k], w);
      }
    }
  });
  return out;
}

std::vector<ReplicaAverages> run_replicas(const SlowFastModel& model, std::span<const double> x,
                                          const FbarConfig& cfg, bool moments) {
  check_config(cfg);
  if (static_cast<int>(x.size()) != model.dim()) throw Error(ErrorCode::kInvalidConfig, "x size != model dimension");
  const StateVector y0 = resolve_y0(model, cfg);
  const double burn_in = cfg.resolved_burn_in(model);
  std::vector<ReplicaAverages> reps(cfg.replicas);
  parallel_for(cfg.replicas, cfg.threads, [&](std::size_t r) {
    reps[r] = replica_run(model, x, y0, burn_in, cfg, static_cast<std::uint32_t>(r), moments);
  });
  return reps;
}

/// Natural cubic spline second derivatives at the knots.
std::vector<double> spline_second_derivatives(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), r(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    a[i] = h0;
    b[i] = 2.0 * (h0 + h1);
    c[i] = h1;
    r[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
  }
  // Thomas algorithm on rows 1..n-2 with m[0] = m[n-1] = 0
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    r[i] -= w * r[i - 1];
  }
  m[n - 2] = r[n - 2] / b[n - 2];
  for (std::size_t i = n - 2; i-- > 1;) m[i] = (r[i] - c[i] * m[i + 1]) / b[i];
  return m;
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

[[noreturn]] void stale(const std::filesystem::path& file, const std::string& what) {
  throw Error(ErrorCode::kStaleCache,
              file.string() + ": " + what + " (rebuild the table with the 'average' subcommand)");
}

}  // namespace

double FbarConfig::resolved_burn_in(const SlowFastModel& model) const {
  if (burn_in) return *burn_in;
  const auto& k = model.declared;
  const double c1 = std::isfinite(k.c[0]) ? k.c[0] : 0.0;
  const double c2 = std::isfinite(k.c[1]) ? k.c[1] : 0.0;
  const double eta = 2.0 * k.beta[0] - 2.0 * k.beta[3] - c1 - c2;
  return eta > 0.0 ? 10.0 / eta : 10.0;
}

FbarEstimate estimate_fbar(const SlowFastModel& model, std::span<const double> x, const FbarConfig& cfg) {
  const auto reps = run_replicas(model, x, cfg, false);
  FbarEstimate out;
  const int d = model.dim();
  out.value.resize(d);
  out.std_error.resize(d);
  for (int k = 0; k < d; ++k) {
    Welford acc;
    for (const auto& r : reps) acc.add(r.f[k].mean);
    out.value[k] = acc.mean;
    out.std_error[k] = acc.std_error();
    if (!(out.std_error[k] <= cfg.stderr_tolerance)) out.flagged = true;
  }
  return out;
}

FbarEstimate estimate_fbar(const SlowFastModel& model, double x, const FbarConfig& cfg) {
  const StateVector xs(model.dim(), x);
  return estimate_fbar(model, xs, cfg);
}

StationaryMoments estimate_stationary_moments(const SlowFastModel& model, std::span<const double> x,
                                              const FbarConfig& cfg) {
  const auto reps = run_replicas(model, x, cfg, true);
  const int d = model.dim();
  StationaryMoments out;
  out.mean.resize(d);
  out.mean_stderr.resize(d);
  out.variance.resize(d);
  out.variance_stderr.resize(d);
  for (int k = 0; k < d; ++k) {
    Welford mean, var;
    for (const auto& r : reps) {
      mean.add(r.y[k].mean);
      var.add(r.y2[k].mean - r.y[k].mean * r.y[k].mean);
    }
    out.mean[k] = mean.mean;
    out.mean_stderr[k] = mean.std_error();
    out.variance[k] = var.mean;
    out.variance_stderr[k] = var.std_error();
  }
  return out;
}

// ---------------------------------------------------------------------------
// AveragedCoefficient

AveragedCoefficient::AveragedCoefficient(std::vector<Component> components, FbarConfig cfg, double burn_in)
    : components_(std::move(components)), cfg_(std::move(cfg)), burn_in_(burn_in) {
  build_splines();
}

void AveragedCoefficient::build_splines() {
  knots_x_.assign(components_.size(), {});
  knots_y_.assign(components_.size(), {});
  second_.assign(components_.size(), {});
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    if (c.x.size() != c.value.size() || c.x.size() != c.std_error.size() || c.x.size() != c.ok.size()) {
      throw Error(ErrorCode::kInvalidConfig, "f-bar component arrays differ in length");
    }
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (!c.ok[i]) continue;
      if (!knots_x_[k].empty() && !(c.x[i] > knots_x_[k].back())) {
        throw Error(ErrorCode::kInvalidConfig, "f-bar nodes must be strictly increasing");
      }
      knots_x_[k].push_back(c.x[i]);
      knots_y_[k].push_back(c.value[i]);
    }
    if (knots_x_[k].empty()) throw Error(ErrorCode::kInvalidConfig, "f-bar component has no usable node");
    second_[k] = spline_second_derivatives(knots_x_[k], knots_y_[k]);
  }
}

bool AveragedCoefficient::contains(int component, double x) const {
  const auto& kx = knots_x_.at(component);
  return x >= kx.front() && x <= kx.back();
}

double AveragedCoefficient::value(int component, double x) const {
  const auto& kx = knots_x_.at(component);
  const auto& ky = knots_y_[component];
  const auto& m = second_[component];
  if (kx.size() == 1) return ky[0];
  if (x < kx.front()) return ky.front() + derivative(component, kx.front()) * (x - kx.front());
  if (x > kx.back()) return ky.back() + derivative(component, kx.back()) * (x - kx.back());
  const std::size_t i =
      std::min<std::size_t>(std::upper_bound(kx.begin(), kx.end(), x) - kx.begin(), kx.size() - 1) - 1;
  const double h = kx[i + 1] - kx[i];
  const double a = (kx[i + 1] - x) / h, b = (x - kx[i]) / h;
  return a * ky[i] + b * ky[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0;
}

double AveragedCoefficient::derivative(int component, double x) const {
  const auto& kx = knots_x_.at(component);
  const auto& ky = knots_y_[component];
  const auto& m = second_[component];
  if (kx.size() == 1) return 0.0;
  const double xc = std::clamp(x, kx.front(), kx.back());
  const std::size_t i =
      std::min<std::size_t>(std::upper_bound(kx.begin(), kx.end(), xc) - kx.begin(), kx.size() - 1) - 1;
  const double h = kx[i + 1] - kx[i];
  const double a = (kx[i + 1] - xc) / h, b = (xc - kx[i]) / h;
  return (ky[i + 1] - ky[i]) / h + ((1.0 - 3.0 * a * a) * m[i] + (3.0 * b * b - 1.0) * m[i + 1]) * h / 6.0;
}

double AveragedCoefficient::max_stderr() const {
  double best = 0.0;
  for (const auto& c : components_) {
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (c.ok[i]) best = std::max(best, c.std_error[i]);
    }
  }
  return best;
}

std::size_t AveragedCoefficient::failed_nodes() const {
  std::size_t n = 0;
  for (const auto& c : components_) n += std::count(c.ok.begin(), c.ok.end(), false);
  return n;
}

double AveragedCoefficient::lipschitz() const {
  double best = 0.0;
  for (int k = 0; k < dim(); ++k) {
    const auto& kx = knots_x_[k];
    for (std::size_t i = 0; i + 1 < kx.size(); ++i) {
      constexpr int kSamples = 32;
      for (int s = 0; s <= kSamples; ++s) {
        const double x = kx[i] + (kx[i + 1] - kx[i]) * s / kSamples;
        best = std::max(best, std::abs(derivative(k, x)));
      }
    }
  }
  return best;
}

void AveragedCoefficient::write_csv(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::kInvalidConfig, "cannot write " + file.string());
  out << "# levyavg-fbar v" << kFormatVersion << '\n';
  out << "# burn_in=" << format_double(burn_in_) << ",horizon=" << format_double(cfg_.horizon)
      << ",replicas=" << cfg_.replicas << ",step=" << format_double(cfg_.step) << ",seed=" << cfg_.seed << '\n';
  out << "component,x,value,stderr,ok\n";
  for (int k = 0; k < dim(); ++k) {
    const auto& c = components_[k];
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      out << k << ',' << format_double(c.x[i]) << ',' << format_double(c.value[i]) << ','
          << format_double(c.std_error[i]) << ',' << (c.ok[i] ? 1 : 0) << '\n';
    }
  }
}

AveragedCoefficient AveragedCoefficient::read_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) stale(file, "cannot open");
  std::string line;
  if (!std::getline(in, line) || line != "# levyavg-fbar v" + std::to_string(kFormatVersion)) {
    stale(file, "format version mismatch");
  }
  FbarConfig cfg;
  double burn_in = 0.0;
  if (!std::getline(in, line) || !line.starts_with("# ")) stale(file, "missing metadata line");
  {
    std::istringstream meta(line.substr(2));
    std::string item;
    int seen = 0;
    while (std::getline(meta, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) stale(file, "bad metadata '" + item + "'");
      const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
      try {
        std::size_t used = 0;
        if (key == "burn_in") burn_in = std::stod(val, &used);
        else if (key == "horizon") cfg.horizon = std::stod(val, &used);
        else if (key == "replicas") cfg.replicas = std::stoull(val, &used);
        else if (key == "step") cfg.step = std::stod(val, &used);
        else if (key == "seed") cfg.seed = std::stoull(val, &used);
        else stale(file, "unknown metadata key '" + key + "'");
        if (used != val.size()) stale(file, "bad metadata value '" + item + "'");
        ++seen;
      } catch (const std::logic_error&) {
        stale(file, "bad metadata value '" + item + "'");
      }
    }
    if (seen != 5) stale(file, "incomplete metadata");
  }
  cfg.burn_in = burn_in;
  if (!std::getline(in, line) || line != "component,x,value,stderr,ok") stale(file, "missing column header");

  std::vector<Component> comps;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::vector<std::string> parts;
    std::string part;
    while (std::getline(fields, part, ',')) parts.push_back(part);
    if (parts.size() != 5) stale(file, "row " + std::to_string(row) + " has " + std::to_string(parts.size()) + " fields");
    try {
      std::size_t u0 = 0, u1 = 0, u2 = 0, u3 = 0, u4 = 0;
      const int k = std::stoi(parts[0], &u0);
      const double x = std::stod(parts[1], &u1);
      const double v = std::stod(parts[2], &u2);
      const double se = std::stod(parts[3], &u3);
      const int ok = std::stoi(parts[4], &u4);
      if (u0 != parts[0].size() || u1 != parts[1].size() || u2 != parts[2].size() || u3 != parts[3].size() ||
          u4 != parts[4].size() || k < 0 || (ok != 0 && ok != 1) || k > static_cast<int>(comps.size()) ||
          !std::isfinite(x) || (ok == 1 && (!std::isfinite(v) || !std::isfinite(se) || se < 0.0))) {
        stale(file, "row " + std::to_string(row) + " is malformed");
      }
      if (k == static_cast<int>(comps.size())) comps.emplace_back();
      auto& c = comps[k];
      c.x.push_back(x);
      c.value.push_back(v);
      c.std_error.push_back(se);
      c.ok.push_back(ok == 1);
    } catch (const std::logic_error&) {
      stale(file, "row " + std::to_string(row) + " is malformed");
    }
  }
  if (comps.empty()) stale(file, "no rows");
  try {
    return AveragedCoefficient(std::move(comps), cfg, burn_in);
  } catch (const Error& e) {
    stale(file, e.what());
  }
}

bool operator==(const AveragedCoefficient& a, const AveragedCoefficient& b) {
  if (a.dim() != b.dim() || a.burn_in_ != b.burn_in_) return false;
  for (int k = 0; k < a.dim(); ++k) {
    const auto& ca = a.components_[k];
    const auto& cb = b.components_[k];
    if (ca.x != cb.x || ca.value != cb.value || ca.std_error != cb.std_error || ca.ok != cb.ok) return false;
  }
  return true;
}

std::vector<double> chebyshev_lobatto_nodes(double lo, double hi, std::size_t n) {
  if (n < 2) throw Error(ErrorCode::kInvalidConfig, "need at least 2 table nodes");
  if (!(hi > lo)) throw Error(ErrorCode::kInvalidConfig, "table interval is empty");
  std::vector<double> x(n);
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = mid - half * std::cos(std::numbers::pi * static_cast<double>(j) / static_cast<double>(n - 1));
  }
  x.front() = lo;
  x.back() = hi;
  // cos(π/2) is not exactly 0
  if (n % 2 == 1) x[n / 2] = mid;
  return x;
}

AveragedCoefficient build_fbar_table(const SlowFastModel& model, SampleBox box, std::size_t n_nodes,
                                     const FbarConfig& cfg) {
  check_config(cfg);
  const auto nodes = chebyshev_lobatto_nodes(box.lo, box.hi, n_nodes);
  const int d = model.dim();
  const StateVector y0 = resolve_y0(model, cfg);
  const double burn_in = cfg.resolved_burn_in(model);
  const std::size_t R = cfg.replicas;

  std::vector<std::vector<double>> cell(n_nodes * R);
  std::vector<char> cell_ok(n_nodes * R, 1);
  parallel_for(n_nodes * R, cfg.threads, [&](std::size_t c) {
    const std::size_t node = c / R;
    const auto r = static_cast<std::uint32_t>(c % R);
    const StateVector x(d, nodes[node]);
    try {
      const auto avg = replica_run(model, x, y0, burn_in, cfg, r, false);
      cell[c].resize(d);
      for (int k = 0; k < d; ++k) cell[c][k] = avg.f[k].mean;
    } catch (const Error&) {
      cell_ok[c] = 0;
    }
  });

  std::vector<AveragedCoefficient::Component> comps(d);
  for (int k = 0; k < d; ++k) {
    auto& comp = comps[k];
    for (std::size_t node = 0; node < n_nodes; ++node) {
      Welford acc;
      bool ok = true;
      for (std::size_t r = 0; r < R; ++r) {
        const std::size_t c = node * R + r;
        if (!cell_ok[c]) {
          ok = false;
          break;
        }
        acc.add(cell[c][k]);
      }
      comp.x.push_back(nodes[node]);
      comp.value.push_back(ok ? acc.mean : 0.0);
      comp.std_error.push_back(ok ? acc.std_error() : 0.0);
      comp.ok.push_back(ok);
    }
  }
  FbarConfig stored = cfg;
  stored.burn_in = burn_in;
  return AveragedCoefficient(std::move(comps), stored, burn_in);
}

// ---------------------------------------------------------------------------
// Mixing

MixingReport estimate_mixing(const SlowFastModel& model, double x, double y0, std::span<const double> lags,
                             const MixingConfig& cfg) {
  if (lags.empty()) throw Error(ErrorCode::kInvalidConfig, "need at least one lag");
  if (cfg.replicas < 2) throw Error(ErrorCode::kInvalidConfig, "need at least 2 replicas");
  const int d = model.dim();
  const int comp = cfg.component;
  if (comp < 0 || comp >= d) throw Error(ErrorCode::kInvalidConfig, "mixing component out of range");

  std::vector<std::size_t> lag_steps;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (!(lags[i] > 0.0) || (i > 0 && !(lags[i] > lags[i - 1]))) {
      throw Error(ErrorCode::kInvalidConfig, "lags must be positive and increasing");
    }
    const auto k = static_cast<std::size_t>(std::max(1.0, std::round(lags[i] / cfg.step)));
    if (!lag_steps.empty() && k <= lag_steps.back()) throw Error(ErrorCode::kInvalidConfig, "lags collide on the step grid");
    lag_steps.push_back(k);
  }

  MixingReport rep;
  rep.x = x;
  rep.y0 = y0;
  for (auto k : lag_steps) rep.lags.push_back(static_cast<double>(k) * cfg.step);
  const auto& kd = model.declared;
  rep.eta_declared = 2.0 * kd.beta[0] - 2.0 * kd.beta[3] - (std::isfinite(kd.c[0]) ? kd.c[0] : 0.0) -
                     (std::isfinite(kd.c[1]) ? kd.c[1] : 0.0);

  if (cfg.fbar_value) {
    rep.fbar = *cfg.fbar_value;
  } else {
    FbarConfig fc = cfg.fbar;
    fc.threads = cfg.threads;
    const auto est = estimate_fbar(model, x, fc);
    rep.fbar = est.value[comp];
    rep.fbar_stderr = est.std_error[comp];
  }

  const StateVector xs(d, x), ys(d, y0);
  const double horizon = static_cast<double>(lag_steps.back() + 1) * cfg.step;
  const std::uint64_t seed = derive_seed(cfg.seed, kMixingTag);
  const std::size_t L = lag_steps.size();
  std::vector<double> samples(cfg.replicas * L);
  const auto& f = model.coeffs.f;
  parallel_for(cfg.replicas, cfg.threads, [&](std::size_t r) {
    RandomStream brownian(seed, StreamKind::kFrozen, static_cast<std::uint32_t>(2 * r));
    RandomStream jumps(seed, StreamKind::kFrozen, static_cast<std::uint32_t>(2 * r + 1));
    std::size_t next = 0;
    run_frozen(model, xs, ys, horizon, cfg.step, brownian, jumps, [&](double u, double, std::span<const double> y) {
      if (next < L && u == static_cast<double>(lag_steps[next]) * cfg.step) {
        samples[r * L + next] = f(x, y[comp]);
        ++next;
      }
    });
  });

  std::vector<double> fit_t, fit_y;
  for (std::size_t l = 0; l < L; ++l) {
    Welford acc;
    for (std::size_t r = 0; r < cfg.replicas; ++r) acc.add(samples[r * L + l]);
    const double bias = acc.mean - rep.fbar;
    rep.curve.push_back(bias * bias);
    const double se = acc.std_error();
    rep.noise_floor.push_back(se * se);
    if (rep.curve.back() > 10.0 * rep.noise_floor.back()) {
      rep.fit_indices.push_back(l);
      fit_t.push_back(rep.lags[l]);
      fit_y.push_back(std::log(rep.curve.back() - rep.noise_floor.back()));
    }
  }
  if (fit_t.size() < 2) {
    throw Error(ErrorCode::kNoSignal, "squared bias is within 10x its noise floor at all but " +
                                          std::to_string(fit_t.size()) + " lags");
  }
  const LinearFit fit = fit_line(fit_t, fit_y);
  rep.eta_hat = -fit.slope;
  rep.fit_intercept = fit.intercept;
  rep.fit_residual = fit.rms_residual;
  rep.monotone_above_floor = true;
  for (std::size_t i = 1; i < rep.fit_indices.size(); ++i) {
    if (!(rep.curve[rep.fit_indices[i]] < rep.curve[rep.fit_indices[i - 1]])) rep.monotone_above_floor = false;
  }
  return rep;
}

EnvelopeFit fit_mixing_envelope(std::span<const MixingReport> reports) {
  EnvelopeFit out;
  if (reports.empty()) return out;
  double rate_sum = 0.0;
  for (const auto& r : reports) rate_sum += r.eta_hat;
  out.rate = rate_sum / static_cast<double>(reports.size());
  std::vector<double> logs;
  for (const auto& r : reports) {
    const double weight = 1.0 + r.x * r.x + r.y0 * r.y0;
    for (auto i : r.fit_indices) {
      logs.push_back(std::log(r.curve[i] / (std::exp(-out.rate * r.lags[i]) * weight)));
    }
  }
  out.points = logs.size();
  if (logs.empty()) return out;
  double mean = 0.0;
  for (double v : logs) mean += v;
  mean /= static_cast<double>(logs.size());
  double ss = 0.0;
  for (double v : logs) ss += (v - mean) * (v - mean);
  out.constant = std::exp(mean);
  out.relative_residual = std::exp(std::sqrt(ss / static_cast<double>(logs.size()))) - 1.0;
  return out;
}

}  // namespace levyavg
