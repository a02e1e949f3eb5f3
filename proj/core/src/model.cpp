#include "levyavg/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "levyavg/error.hpp"
#include "levyavg/expression.hpp"
#include "levyavg/rng.hpp"

namespace levyavg {
namespace {

constexpr std::array<const char*, 6> kCoefficientNames{"f", "g", "h", "F", "G", "H"};

JumpMeasure benchmark_measure() { return JumpMeasure::uniform(1.0, -0.5, 0.5, 1.0); }

void set_coefficient(CoefficientSet& c, int index, const std::string& source) {
  const Expression e = Expression::parse(source);
  switch (index) {
    case 0:
      c.f = [e](double x, double y) { return e(x, y); };
      c.f_depends_on_y = e.uses('y');
      break;
    case 1: c.g = [e](double x) { return e(x); }; break;
    case 2: c.h = [e](double x, double z) { return e(x, 0.0, z); }; break;
    case 3: c.F = [e](double x, double y) { return e(x, y); }; break;
    case 4: c.G = [e](double x, double y) { return e(x, y); }; break;
    case 5:
      c.H = [e](double x, double y, double z) { return e(x, y, z); };
      c.H_depends_on_y = e.uses('y');
      break;
    default: break;
  }
  c.sources[index] = source;
}

StateVector broadcast_state(const nlohmann::json& value, int dim) {
  if (value.is_number()) return StateVector(dim, value.get<double>());
  auto v = value.get<StateVector>();
  if (static_cast<int>(v.size()) != dim) throw Error(ErrorCode::kInvalidConfig, "initial state size != dim");
  return v;
}

}  // namespace

void SlowFastModel::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "epsilon must lie in (0, 1]");
  if (static_cast<int>(x0.size()) != dim() || static_cast<int>(y0.size()) != dim()) {
    throw Error(ErrorCode::kInvalidConfig, "initial states must have the space dimension");
  }
  if (!coeffs.f || !coeffs.g || !coeffs.h || !coeffs.F || !coeffs.G || !coeffs.H) {
    throw Error(ErrorCode::kInvalidConfig, "model '" + name + "' is missing a coefficient map");
  }
}

SlowFastModel SlowFastModel::with_epsilon(double eps) const {
  SlowFastModel m = *this;
  m.epsilon = eps;
  m.validate();
  return m;
}

nlohmann::json SlowFastModel::to_config() const {
  nlohmann::json out;
  out["name"] = name;
  out["space"] = space.to_config();
  for (std::size_t i = 0; i < kCoefficientNames.size(); ++i) out[kCoefficientNames[i]] = coeffs.sources[i];
  out["nu1"] = nu1.to_config();
  out["nu2"] = nu2.to_config();
  out["epsilon"] = epsilon;
  out["x0"] = x0;
  out["y0"] = y0;
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json cs = nlohmann::json::array();
  for (double c : declared.c) cs.push_back(finite_or_null(c));
  out["constants"] = {{"beta", declared.beta}, {"C", cs}, {"f_bound", finite_or_null(declared.f_bound)}};
  return out;
}

std::vector<std::string> builtin_model_names() {
  return {"benchmark", "benchmark-nojump", "benchmark-yfree", "benchmark-laplacian16"};
}

SlowFastModel builtin_benchmark() {
  SlowFastModel m;
  m.name = "benchmark";
  m.space = SpectralSpace::scalar(1.0);
  auto& c = m.coeffs;
  c.f = [](double x, double y) { return std::sin(x + y); };
  c.g = [](double x) { return 0.5 * std::cos(x); };
  c.h = [](double x, double z) { return 0.1 * z * std::sin(x); };
  c.F = [](double x, double y) { return std::tanh(x) - y; };
  c.G = [](double, double) { return 0.5; };
  c.H = [](double, double, double z) { return 0.2 * z; };
  c.sources = {"sin(x+y)", "0.5*cos(x)", "0.1*z*sin(x)", "tanh(x)-y", "0.5", "0.2*z"};
  c.H_depends_on_y = false;
  m.nu1 = benchmark_measure();
  m.nu2 = benchmark_measure();
  m.declared.beta = {1.0, 0.5, 0.5, 0.0};
  m.declared.f_bound = 1.0;
  m.epsilon = 0.1;
  m.x0 = {1.0};
  m.y0 = {0.0};
  return m;
}

SlowFastModel builtin_model(const std::string& name) {
  SlowFastModel m = builtin_benchmark();
  if (name == "benchmark") return m;
  if (name == "benchmark-nojump") {
    m.name = name;
    m.coeffs.H = [](double, double, double) { return 0.0; };
    m.coeffs.sources[5] = "0";
    m.nu2 = JumpMeasure::none(1.0);
    return m;
  }
  if (name == "benchmark-yfree") {
    m.name = name;
    m.coeffs.f = [](double x, double) { return std::sin(x); };
    m.coeffs.sources[0] = "sin(x)";
    m.coeffs.f_depends_on_y = false;
    return m;
  }
  if (name == "benchmark-laplacian16") {
    m.name = name;
    m.space = SpectralSpace::laplacian(16);
    m.declared.beta[0] = m.space.beta1();
    m.x0.resize(16);
    for (int k = 1; k <= 16; ++k) m.x0[k - 1] = 1.0 / k;
    m.y0.assign(16, 0.0);
    return m;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown builtin model '" + name + "'");
}

SlowFastModel load_model(const nlohmann::json& config) {
  if (config.is_string()) return load_model(config.get<std::string>());
  if (!config.is_object()) throw Error(ErrorCode::kInvalidConfig, "model config must be a string or object");
  try {
    SlowFastModel m = builtin_model(config.value("base", std::string("benchmark")));
    if (config.contains("name")) m.name = config.at("name").get<std::string>();
    else if (config.contains("base")) m.name = config.at("base").get<std::string>() + "+custom";
    else m.name = "custom";
    if (config.contains("space")) {
      m.space = SpectralSpace::from_config(config.at("space"));
      if (!config.contains("x0")) m.x0.assign(m.dim(), m.x0.empty() ? 0.0 : m.x0[0]);
      if (!config.contains("y0")) m.y0.assign(m.dim(), 0.0);
    }
    for (std::size_t i = 0; i < kCoefficientNames.size(); ++i) {
      if (config.contains(kCoefficientNames[i])) {
        const auto& v = config.at(kCoefficientNames[i]);
        set_coefficient(m.coeffs, static_cast<int>(i), v.is_number() ? v.dump() : v.get<std::string>());
      }
    }
    if (config.contains("nu1")) m.nu1 = JumpMeasure::from_config(config.at("nu1"));
    if (config.contains("nu2")) m.nu2 = JumpMeasure::from_config(config.at("nu2"));
    if (config.contains("epsilon")) m.epsilon = config.at("epsilon").get<double>();
    if (config.contains("x0")) m.x0 = broadcast_state(config.at("x0"), m.dim());
    if (config.contains("y0")) m.y0 = broadcast_state(config.at("y0"), m.dim());
    if (config.contains("constants")) {
      const auto& k = config.at("constants");
      auto read = [](const nlohmann::json& v) {
        return v.is_null() ? DeclaredConstants::kUndeclared : v.get<double>();
      };
      if (k.contains("beta")) {
        const auto& b = k.at("beta");
        for (std::size_t i = 0; i < 4 && i < b.size(); ++i) m.declared.beta[i] = read(b[i]);
      }
      if (k.contains("C")) {
        const auto& cs = k.at("C");
        for (std::size_t i = 0; i < 5 && i < cs.size(); ++i) m.declared.c[i] = read(cs[i]);
      }
      if (k.contains("f_bound")) m.declared.f_bound = read(k.at("f_bound"));
    } else if (config.contains("f")) {
      m.declared.f_bound = DeclaredConstants::kUndeclared;
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("model config: ") + e.what());
  }
}

SlowFastModel load_model(const std::string& spec) {
  constexpr std::string_view kBuiltin = "builtin:";
  if (spec.starts_with(kBuiltin)) return builtin_model(spec.substr(kBuiltin.size()));
  if (!spec.empty() && spec.front() == '{') return load_model(nlohmann::json::parse(spec));
  std::ifstream in(spec);
  if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot read model file '" + spec + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, "model file '" + spec + "': " + e.what());
  }
  return load_model(j);
}

CoefficientValues eval_coefficients(const SlowFastModel& model, std::span<const double> x,
                                    std::span<const double> y, double z) {
  const std::size_t d = static_cast<std::size_t>(model.dim());
  if (x.size() != d || y.size() != d) throw Error(ErrorCode::kInvalidConfig, "state size != model dimension");
  const auto& c = model.coeffs;
  CoefficientValues out;
  StateVector* slots[6] = {&out.f, &out.g, &out.h, &out.F, &out.G, &out.H};
  for (auto* s : slots) s->resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    out.f[k] = c.f(x[k], y[k]);
    out.g[k] = c.g(x[k]);
    out.h[k] = c.h(x[k], z);
    out.F[k] = c.F(x[k], y[k]);
    out.G[k] = c.G(x[k], y[k]);
    out.H[k] = c.H(x[k], y[k], z);
    for (int i = 0; i < 6; ++i) {
      if (!std::isfinite((*slots[i])[k])) {
        std::ostringstream msg;
        msg << kCoefficientNames[i] << "[" << k << "] is not finite at x=" << x[k] << ", y=" << y[k] << ", z=" << z;
        throw Error(ErrorCode::kCoefficientError, msg.str());
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hypothesis audit

namespace {

struct Sup {
  double value = 0.0;
  bool seen = false;
  std::size_t* non_finite = nullptr;

  void add(double q) {
    if (!std::isfinite(q)) {
      ++*non_finite;
      value = std::numeric_limits<double>::infinity();
      seen = true;
      return;
    }
    if (!seen || q > value) value = q;
    seen = true;
  }
};

double clamp_to(double v, const SampleBox& box) { return std::clamp(v, box.lo, box.hi); }

}  // namespace

HypothesisReport::Flags HypothesisReport::flags(double tol) const {
  Flags out;
  if (std::isfinite(f_bound_declared)) {
    out.f_bounded = f_sup <= f_bound_declared * (1.0 + tol) + tol;
  } else {
    // Undeclared bound: a bounded map saturates, so the sup over the full
    // box stays close to the sup over the inner half-box.
    out.f_bounded = std::isfinite(f_sup) && f_sup <= (1.25 + tol) * f_sup_inner + tol;
  }
  const bool finite_beta = std::isfinite(beta2_hat) && std::isfinite(beta4_hat);
  out.h1 = beta1 > 0.0 && finite_beta && beta2_hat > -tol;
  out.h2 = std::isfinite(c_hat[0]) && std::isfinite(c_hat[1]);
  out.h3 = out.f_bounded && std::isfinite(c_hat[2]) && std::isfinite(c_hat[3]) && std::isfinite(c_hat[4]);
  out.h4 = std::isfinite(kappa_hat) && std::isfinite(eta_hat) && kappa_hat > -tol && eta_hat > -tol;
  return out;
}

nlohmann::json HypothesisReport::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(std::to_string(v)); };
  const Flags f = flags();
  nlohmann::json out;
  out["box"] = {box.lo, box.hi};
  out["n_samples"] = n_samples;
  out["seed"] = seed;
  out["tolerance"] = tolerance;
  out["beta1"] = num(beta1);
  out["beta2_hat"] = num(beta2_hat);
  out["beta3_declared"] = num(beta3_declared);
  out["beta4_hat"] = num(beta4_hat);
  nlohmann::json c = nlohmann::json::array();
  for (double v : c_hat) c.push_back(num(v));
  out["C_hat"] = c;
  auto arr = [&](const std::array<double, 3>& a) {
    nlohmann::json j = nlohmann::json::object();
    for (int i = 0; i < 3; ++i) j["q" + std::to_string(2 * (i + 1))] = num(a[i]);
    return j;
  };
  out["C2_by_q"] = arr(c2_by_q);
  out["C4_by_q"] = arr(c4_by_q);
  out["C5_by_q"] = arr(c5_by_q);
  out["C1_fast"] = num(c1_fast);
  out["C2_fast"] = num(c2_fast);
  out["C3_fast"] = num(c3_fast);
  out["f_sup"] = num(f_sup);
  out["f_sup_inner"] = num(f_sup_inner);
  out["f_bound_declared"] = num(f_bound_declared);
  out["kappa_hat"] = num(kappa_hat);
  out["eta_hat"] = num(eta_hat);
  out["non_finite_quotients"] = non_finite_quotients;
  out["flags"] = {{"h1", f.h1}, {"h2", f.h2}, {"h3", f.h3}, {"h4", f.h4}, {"f_bounded", f.f_bounded}, {"all", f.all()}};
  return out;
}

HypothesisReport verify_hypotheses(const SlowFastModel& model, SampleBox box, std::size_t n_samples,
                                   std::uint64_t seed, double tolerance) {
  if (!(box.hi > box.lo)) throw Error(ErrorCode::kInvalidConfig, "sample box is empty");
  if (n_samples < 2) throw Error(ErrorCode::kInvalidConfig, "need at least 2 samples");

  HypothesisReport r;
  r.box = box;
  r.n_samples = n_samples;
  r.seed = seed;
  r.tolerance = tolerance;
  r.beta1 = model.space.beta1();
  r.beta3_declared = model.declared.beta[2];
  r.f_bound_declared = model.declared.f_bound;

  std::size_t& bad = r.non_finite_quotients;
  Sup dissip{0, false, &bad}, monotone{0, false, &bad};
  Sup c1{0, false, &bad}, c3{0, false, &bad};
  std::array<Sup, 3> c2q, c4q, c5q;
  for (int i = 0; i < 3; ++i) c2q[i].non_finite = c4q[i].non_finite = c5q[i].non_finite = &bad;
  Sup c1f{0, false, &bad}, c2f{0, false, &bad}, c3f{0, false, &bad};
  Sup fsup{0, false, &bad}, finner{0, false, &bad};

  const auto& c = model.coeffs;
  const double width = box.hi - box.lo;
  const double mid = 0.5 * (box.lo + box.hi);
  const double log_min = std::log(1e-4 * width);
  const double log_max = std::log(width);
  RandomStream rng(seed, StreamKind::kHypothesis, 0);

  for (std::size_t s = 0; s < n_samples; ++s) {
    const double x1 = box.lo + width * rng.uniform();
    const double y1 = box.lo + width * rng.uniform();
    const double scale = std::exp(log_min + (log_max - log_min) * rng.uniform());
    const double angle = 2.0 * 3.141592653589793 * rng.uniform();
    const double x2 = clamp_to(x1 + scale * std::cos(angle), box);
    double y2 = clamp_to(y1 + scale * std::sin(angle), box);
    // second y at fixed x for the fast-equation quotients
    double y3 = y1 + (rng.uniform() < 0.5 ? -scale : scale);
    if (y3 < box.lo || y3 > box.hi) y3 = 2.0 * y1 - y3;
    y3 = clamp_to(y3, box);

    const double f1 = c.f(x1, y1);
    fsup.add(std::abs(f1));
    if (std::abs(x1 - mid) <= 0.25 * width && std::abs(y1 - mid) <= 0.25 * width) finner.add(std::abs(f1));

    // h1: dissipativity and monotonicity of the fast drift
    const double F1 = c.F(x1, y1);
    if (y1 != 0.0) dissip.add((y1 * F1 - r.beta3_declared) / (y1 * y1));
    const double dy3 = y1 - y3;
    if (dy3 != 0.0) {
      const double F3 = c.F(x1, y3);
      monotone.add((F1 - F3) * dy3 / (dy3 * dy3));
      const double dG = c.G(x1, y1) - c.G(x1, y3);
      c1f.add(dG * dG / (dy3 * dy3));
      const double dH2 = model.nu2.integrate([&](double z) {
        const double d = c.H(x1, y1, z) - c.H(x1, y3, z);
        return d * d;
      });
      c2f.add(dH2 / (dy3 * dy3));
    }

    // h2: Lipschitz quotients
    const double dx = x1 - x2, dy = y1 - y2;
    const double dist2 = dx * dx + dy * dy;
    if (dist2 > 0.0) {
      const double df = f1 - c.f(x2, y2);
      const double dg = c.g(x1) - c.g(x2);
      const double dF = F1 - c.F(x2, y2);
      const double dG = c.G(x1, y1) - c.G(x2, y2);
      const double dh = model.nu1.integrate([&](double z) {
        const double d = c.h(x1, z) - c.h(x2, z);
        return d * d;
      });
      c1.add((df * df + dg * dg + dF * dF + dG * dG + dh) / dist2);
      for (int i = 0; i < 3; ++i) {
        const int q = 2 * (i + 1);
        const double num = model.nu2.integrate(
            [&](double z) { return std::pow(std::abs(c.H(x1, y1, z) - c.H(x2, y2, z)), q); });
        c2q[i].add(num / (std::pow(std::abs(dx), q) + std::pow(std::abs(dy), q)));
      }
    }

    // h3: linear-growth quotients
    const double g1 = c.g(x1), G1 = c.G(x1, y1);
    const double growth = 1.0 + x1 * x1 + y1 * y1;
    c3.add((f1 * f1 + g1 * g1 + F1 * F1 + G1 * G1) / growth);
    c3f.add(G1 * G1 / growth);
    for (int i = 0; i < 3; ++i) {
      const int q = 2 * (i + 1);
      const double hq = model.nu1.integrate([&](double z) { return std::pow(std::abs(c.h(x1, z)), q); });
      c4q[i].add(hq / (1.0 + std::pow(std::abs(x1), q)));
      const double Hq = model.nu2.integrate([&](double z) { return std::pow(std::abs(c.H(x1, y1, z)), q); });
      c5q[i].add(Hq / (1.0 + std::pow(std::abs(x1), q) + std::pow(std::abs(y1), q)));
    }
  }

  r.beta2_hat = dissip.seen ? -dissip.value : std::numeric_limits<double>::quiet_NaN();
  r.beta4_hat = monotone.value;
  r.c1_fast = c1f.value;
  r.c2_fast = c2f.value;
  r.c3_fast = c3f.value;
  for (int i = 0; i < 3; ++i) {
    r.c2_by_q[i] = c2q[i].value;
    r.c4_by_q[i] = c4q[i].value;
    r.c5_by_q[i] = c5q[i].value;
  }
  auto max3 = [](const std::array<double, 3>& a) { return std::max({a[0], a[1], a[2]}); };
  r.c_hat = {c1.value, max3(r.c2_by_q), c3.value, max3(r.c4_by_q), max3(r.c5_by_q)};
  r.f_sup = fsup.value;
  r.f_sup_inner = finner.value;
  r.kappa_hat = 2.0 * r.beta1 + 2.0 * r.beta2_hat - r.c3_fast - r.c_hat[4];
  r.eta_hat = 2.0 * r.beta1 - 2.0 * r.beta4_hat - r.c1_fast - r.c2_fast;
  return r;
}

}  // namespace levyavg
