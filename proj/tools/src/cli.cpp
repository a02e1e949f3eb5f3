#include "levyavg/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "levyavg/error.hpp"
#include "levyavg/harness.hpp"
#include "levyavg/model.hpp"
#include "levyavg/noise_bundle.hpp"
#include "levyavg/parallel.hpp"
#include "levyavg/rng.hpp"
#include "levyavg/simulate.hpp"

#ifndef LEVYAVG_VERSION
#define LEVYAVG_VERSION "unknown"
#endif

namespace levyavg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// A config or model file that cannot be opened or parsed.
struct NoInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::optional<std::string> config, model, eps, p, delta_rule, fbar_cache, box, alphas, ratios, triplet,
      theta_grid, window_eps, multipliers, step, natural_step, fbar_step;
  std::optional<std::size_t> paths, nodes, replicas, samples, dump_paths, path_index, window_samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> horizon, fbar_horizon, fbar_burn_in, tol, theta_step,
      bounded_factor;
  std::optional<unsigned> threads;
  std::string out = "runs";
  bool no_control = false;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NoInput("cannot read '" + path + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw NoInput("'" + path + "' is not valid JSON: " + e.what());
  }
}

SlowFastModel resolve_model(const json& spec) {
  if (spec.is_string()) {
    const std::string s = spec.get<std::string>();
    if (!s.starts_with("builtin:") && !s.starts_with("{")) return load_model(read_json_file(s));
  }
  return load_model(spec);
}

template <class T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) throw Error(ErrorCode::kInvalidConfig, "bad list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::kInvalidConfig, "empty list");
  return out;
}

/// Plain or dyadic ("2^-10") number.
double parse_number(const std::string& text) {
  const auto v = parse_eps_list(text);
  if (v.size() != 1) throw Error(ErrorCode::kInvalidConfig, "expected one number, got '" + text + "'");
  return v.front();
}

/// Merged view of config file and flags; `doc` is what gets echoed.
struct Resolved {
  std::string subcommand;
  json model_spec;
  SlowFastModel model;
  StudyConfig study;
  json options;
  unsigned threads = 1;

  json doc() const {
    return {{"subcommand", subcommand},
            {"model", model_spec},
            {"model_resolved", model.to_config()},
            {"study", study.to_json()},
            {"options", options}};
  }
};

json default_options(const std::string& sub) {
  json o = json::object();
  if (sub == "hypotheses") o = {{"box", {-3.0, 3.0}}, {"samples", 10000}, {"tol", 0.0}};
  if (sub == "validate-noise") {
    o = {{"triplet", "0,1,none"}, {"theta_grid", {-5.0, 5.0}}, {"theta_step", 0.5}, {"samples", 100000}, {"tol", 0.02}};
  }
  if (sub == "simulate") o = {{"path", 0}, {"fbar_cache", nullptr}};
  if (sub == "converge") o = {{"control", true}, {"fbar_cache", nullptr}};
  if (sub == "window" || sub == "average") o = {{"fbar_cache", nullptr}};
  return o;
}

Resolved resolve(const std::string& sub, const Flags& f) {
  Resolved r;
  r.subcommand = sub;
  json file = json::object();
  if (f.config) {
    file = read_json_file(*f.config);
    if (file.contains("config") && file.contains("config_hash")) file = file.at("config");
  }
  r.model_spec = file.value("model", json("builtin:benchmark"));
  if (f.model) r.model_spec = *f.model;
  r.model = resolve_model(r.model_spec);

  r.study = file.contains("study") ? StudyConfig::from_json(file.at("study")) : StudyConfig{};
  auto& s = r.study;
  if (f.eps) s.eps = parse_eps_list(*f.eps);
  if (f.p) s.p = parse_list<int>(*f.p);
  if (f.paths) s.paths = *f.paths;
  if (f.horizon) s.horizon = *f.horizon;
  if (f.step) s.h = parse_number(*f.step);
  if (f.natural_step) s.natural_step = parse_number(*f.natural_step);
  if (f.delta_rule) s.delta_rule = DeltaRule::parse(*f.delta_rule);
  if (f.seed) s.seed = *f.seed;
  if (f.dump_paths) s.dump_paths = *f.dump_paths;
  if (f.nodes) s.fbar_nodes = *f.nodes;
  if (f.replicas) s.fbar.replicas = *f.replicas;
  if (f.fbar_horizon) s.fbar.horizon = *f.fbar_horizon;
  if (f.fbar_burn_in) s.fbar.burn_in = *f.fbar_burn_in;
  if (f.fbar_step) s.fbar.step = parse_number(*f.fbar_step);
  if (f.alphas) s.alphas = parse_list<double>(*f.alphas);
  if (f.ratios) s.window_ratios = parse_list<double>(*f.ratios);
  if (f.window_eps) s.window_eps = parse_eps_list(*f.window_eps).at(0);
  if (f.window_samples) s.window_samples = *f.window_samples;
  if (f.multipliers) s.delta_multipliers = parse_list<double>(*f.multipliers);
  if (f.bounded_factor) s.bounded_factor = *f.bounded_factor;

  r.options = default_options(sub);
  if (file.contains("options")) {
    for (const auto& [k, v] : file.at("options").items()) {
      if (r.options.contains(k)) r.options[k] = v;
    }
  }
  auto set = [&](const char* key, const json& v) {
    if (r.options.contains(key)) r.options[key] = v;
  };
  if (f.box) {
    const auto [lo, hi] = parse_range(*f.box);
    set("box", {lo, hi});
    s.fbar_box = {lo, hi};
  }
  if (f.samples) set("samples", *f.samples);
  if (f.tol) set("tol", *f.tol);
  if (f.triplet) set("triplet", *f.triplet);
  if (f.theta_grid) {
    const auto [lo, hi] = parse_range(*f.theta_grid);
    set("theta_grid", {lo, hi});
  }
  if (f.theta_step) set("theta_step", *f.theta_step);
  if (f.path_index) set("path", *f.path_index);
  if (f.fbar_cache) set("fbar_cache", *f.fbar_cache);
  if (f.no_control) set("control", false);

  r.threads = resolve_threads(f.threads);
  s.threads = r.threads;
  return r;
}

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  const fs::path& path() const { return dir_; }
  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error(ErrorCode::kInvalidConfig, "cannot write " + (dir_ / name).string());
    out << content;
    add(name);
  }
  void add(const std::string& name) {
    if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
  }
  /// Registers files written by library calls (write_results).
  void add_existing() {
    for (const char* name : {"results.csv", "timing.csv"}) {
      if (fs::exists(dir_ / name)) add(name);
    }
  }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

void print_verdicts(std::ostream& out, const std::vector<Verdict>& verdicts) {
  for (const auto& v : verdicts) out << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
}

AveragedCoefficient obtain_fbar(const Resolved& r, OutputDir& dir, std::ostream& out) {
  const json& cache = r.options.at("fbar_cache");
  AveragedCoefficient table;
  if (cache.is_string() && fs::exists(cache.get<std::string>())) {
    table = load_fbar(cache.get<std::string>());
    if (table.dim() != r.model.dim()) {
      throw Error(ErrorCode::kStaleCache, "cached table has dimension " + std::to_string(table.dim()) +
                                              ", model has " + std::to_string(r.model.dim()) +
                                              " (rebuild the table with the 'average' subcommand)");
    }
    out << "f-bar table loaded from " << cache.get<std::string>() << '\n';
  } else {
    table = build_study_fbar(r.model, r.study);
    if (cache.is_string()) {
      cache_fbar(cache.get<std::string>(), table);
      out << "f-bar table cached at " << cache.get<std::string>() << '\n';
    }
  }
  table.write_csv(dir.path() / "fbar.csv");
  dir.add("fbar.csv");
  return table;
}

SlowFastModel y_free_control(const SlowFastModel& model) {
  SlowFastModel m = model;
  m.name = model.name + "-control";
  m.coeffs.f = [f = model.coeffs.f](double x, double) { return f(x, 0.0); };
  m.coeffs.sources[0] = "(" + model.coeffs.sources[0] + ")|y=0";
  m.coeffs.f_depends_on_y = false;
  return m;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns true when every verdict passes.

bool cmd_hypotheses(const Resolved& r, OutputDir& dir, std::ostream& out) {
  const auto& o = r.options;
  const SampleBox box{o.at("box").at(0).get<double>(), o.at("box").at(1).get<double>()};
  const double tol = o.at("tol").get<double>();
  const HypothesisReport rep = verify_hypotheses(r.model, box, o.at("samples").get<std::size_t>(), r.study.seed, tol);
  const auto flags = rep.flags();
  std::vector<Verdict> v = {
      {"H1 dissipativity", flags.h1, "beta2_hat = " + format_number(rep.beta2_hat)},
      {"H2 Lipschitz", flags.h2, "C1 = " + format_number(rep.c_hat[0]) + ", C2 = " + format_number(rep.c_hat[1])},
      {"H3 growth", flags.h3, "C3..C5 = " + format_number(rep.c_hat[2]) + ", " + format_number(rep.c_hat[3]) + ", " +
                                  format_number(rep.c_hat[4])},
      {"H4 margins", flags.h4, "kappa_hat = " + format_number(rep.kappa_hat) + ", eta_hat = " + format_number(rep.eta_hat)},
      {"f bounded", flags.f_bounded, "sup|f| = " + format_number(rep.f_sup)},
      {"kappa_hat > 0", rep.kappa_hat > 0.0, format_number(rep.kappa_hat)},
      {"eta_hat > 0", rep.eta_hat > 0.0, format_number(rep.eta_hat)},
  };
  std::ostringstream csv;
  csv << "quantity,value\n";
  csv << "beta1," << format_number(rep.beta1) << "\nbeta2_hat," << format_number(rep.beta2_hat) << "\nbeta3_declared,"
      << format_number(rep.beta3_declared) << "\nbeta4_hat," << format_number(rep.beta4_hat) << '\n';
  for (int i = 0; i < 5; ++i) csv << 'C' << i + 1 << "_hat," << format_number(rep.c_hat[i]) << '\n';
  csv << "C1_fast," << format_number(rep.c1_fast) << "\nC2_fast," << format_number(rep.c2_fast) << "\nC3_fast,"
      << format_number(rep.c3_fast) << "\nf_sup," << format_number(rep.f_sup) << "\nkappa_hat,"
      << format_number(rep.kappa_hat) << "\neta_hat," << format_number(rep.eta_hat) << '\n';
  dir.write("results.csv", csv.str());
  dir.write("hypotheses.json", rep.to_json().dump(2) + "\n");
  std::ostringstream md;
  md << "# Hypothesis audit: " << r.model.name << "\n\nbox [" << format_number(box.lo) << ", " << format_number(box.hi)
     << "], " << rep.n_samples << " samples, tolerance " << format_number(tol)
     << "\n\nSampled constants are lower estimates of the true suprema.\n\n## Verdicts\n\n";
  for (const auto& x : v) md << "- **" << (x.pass ? "PASS" : "FAIL") << "** " << x.name << ": " << x.detail << '\n';
  dir.write("report.md", md.str());
  print_verdicts(out, v);
  return all_pass(v);
}

bool cmd_validate_noise(const Resolved& r, OutputDir& dir, std::ostream& out) {
  const auto& o = r.options;
  const LevyTriplet triplet = parse_triplet(o.at("triplet").get<std::string>());
  const double lo = o.at("theta_grid").at(0).get<double>(), hi = o.at("theta_grid").at(1).get<double>();
  const double step = o.at("theta_step").get<double>();
  if (!(step > 0.0)) throw Error(ErrorCode::kInvalidConfig, "theta step must be > 0");
  std::vector<double> thetas;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) thetas.push_back(lo + static_cast<double>(i) * step);
  RandomStream stream(r.study.seed, StreamKind::kNoiseValidation, 0);
  const CfComparison cmp = compare_characteristic_function(triplet, thetas, o.at("samples").get<std::size_t>(), stream);
  std::ostringstream csv;
  csv << "theta,empirical_re,empirical_im,analytic_re,analytic_im,abs_error\n";
  for (std::size_t i = 0; i < cmp.theta.size(); ++i) {
    csv << format_number(cmp.theta[i]) << ',' << format_number(cmp.empirical[i].real()) << ','
        << format_number(cmp.empirical[i].imag()) << ',' << format_number(cmp.analytic[i].real()) << ','
        << format_number(cmp.analytic[i].imag()) << ',' << format_number(std::abs(cmp.empirical[i] - cmp.analytic[i]))
        << '\n';
  }
  dir.write("results.csv", csv.str());
  const double tol = o.at("tol").get<double>();
  const std::vector<Verdict> v = {{"empirical CF matches Levy-Khintchine", cmp.max_error <= tol,
                                   "max |error| = " + format_number(cmp.max_error) + " (tol " + format_number(tol) + ")"}};
  dir.write("report.md", "# Characteristic function check\n\ntriplet `" + o.at("triplet").get<std::string>() + "`, " +
                             std::to_string(o.at("samples").get<std::size_t>()) + " unit-time increments\n\n" +
                             "- **" + (v[0].pass ? "PASS" : "FAIL") + "** " + v[0].name + ": " + v[0].detail + "\n");
  print_verdicts(out, v);
  return v[0].pass;
}

bool cmd_average(const Resolved& r, OutputDir& dir, std::ostream& out) {
  const AveragedCoefficient table = obtain_fbar(r, dir, out);
  std::ostringstream csv, md;
  csv << "component,x,value,stderr,ok\n";
  for (int k = 0; k < table.dim(); ++k) {
    const auto& c = table.component(k);
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      csv << k << ',' << format_number(c.x[i]) << ',' << format_number(c.value[i]) << ','
          << format_number(c.std_error[i]) << ',' << (c.ok[i] ? 1 : 0) << '\n';
    }
  }
  dir.write("results.csv", csv.str());
  const std::vector<Verdict> v = {{"every node estimated", table.failed_nodes() == 0,
                                   std::to_string(table.failed_nodes()) + " failed nodes"}};
  md << "# Averaged drift table: " << r.model.name << "\n\nburn-in " << format_number(table.burn_in()) << ", window "
     << format_number(table.config().horizon) << ", " << table.config().replicas << " replicas, step "
     << format_number(table.config().step) << "\n\n- interpolation: " << table.interpolation()
     << "\n- max stderr: " << format_number(table.max_stderr()) << "\n- Lipschitz estimate: "
     << format_number(table.lipschitz()) << "\n\n## Verdicts\n\n";
  for (const auto& x : v) md << "- **" << (x.pass ? "PASS" : "FAIL") << "** " << x.name << ": " << x.detail << '\n';
  dir.write("report.md", md.str());
  print_verdicts(out, v);
  return all_pass(v);
}

bool cmd_simulate(const Resolved& r, OutputDir& dir, std::ostream& out) {
  const AveragedCoefficient fbar = obtain_fbar(r, dir, out);
  const double eps = r.study.eps.front();
  const SlowFastModel m = r.model.with_epsilon(eps);
  const auto path = r.options.at("path").get<std::uint32_t>();
  const NoiseBundle noise = generate_noise(m, r.study.grid_for(eps), r.study.seed, path);
  const PathPair coupled = simulate_coupled(m, noise);
  const PathPair reduced = simulate_reduced(m, fbar, noise.slow);
  write_trajectory_csv(dir.path() / "coupled.csv", coupled);
  write_trajectory_csv(dir.path() / "reduced.csv", reduced);
  dir.add("coupled.csv");
  dir.add("reduced.csv");

  std::ostringstream energy, csv;
  std::vector<std::vector<double>> residuals;
  energy << "t";
  for (int p : r.study.p) {
    energy << ",residual_p" << p;
    residuals.push_back(energy_residual(coupled, m, noise, p));
  }
  energy << '\n';
  for (std::size_t i = 0; i < coupled.nodes(); ++i) {
    energy << format_number(coupled.t[i]);
    for (const auto& res : residuals) energy << ',' << format_number(res[i]);
    energy << '\n';
  }
  dir.write("energy.csv", energy.str());
  csv << "quantity,value\n";
  csv << "eps," << format_number(eps) << "\npath," << path << "\nnodes," << coupled.nodes() << "\nslow_jumps,"
      << coupled.usage.n1_events << "\nfast_jumps," << coupled.usage.n2_events << "\ndomain_exceeded,"
      << reduced.domain_exceeded << '\n';
  for (int p : r.study.p) csv << "sup_distance_p" << p << ',' << format_number(sup_distance(coupled, reduced, 2.0 * p)) << '\n';
  dir.write("results.csv", csv.str());
  dir.write("report.md", "# Single path: " + m.name + "\n\neps = " + format_number(eps) + ", path " +
                             std::to_string(path) + "\n\nTrajectories in coupled.csv and reduced.csv, energy " +
                             "residuals in energy.csv.\n");
  out << "wrote " << coupled.nodes() << " nodes\n";
  return true;
}

bool cmd_converge(const Resolved& r, OutputDir& dir, std::ostream& out) {
  const AveragedCoefficient fbar = obtain_fbar(r, dir, out);
  StudyConfig cfg = r.study;
  if (cfg.dump_paths > 0) cfg.dump_directory = dir.path() / "paths";
  ConvergenceTable table = strong_error_study(r.model, fbar, cfg);
  std::string report = render_report("Strong averaging error: " + r.model.name, table);
  if (r.options.at("control").get<bool>()) {
    // With f free of y the averaged drift is f itself, so no estimation is needed.
    const SlowFastModel control = y_free_control(r.model);
    const FunctionFbar exact([f = control.coeffs.f](double x) { return f(x, 0.0); });
    StudyConfig ccfg = r.study;
    ccfg.dump_paths = 0;
    const ConvergenceTable ctable = strong_error_study(control, exact, ccfg);
    std::ostringstream csv;
    csv << "eps,p,error,stderr,paths,failures\n";
    for (const auto& row : ctable.rows) {
      csv << format_number(row.eps) << ',' << row.p << ',' << format_number(row.error) << ','
          << format_number(row.std_error) << ',' << row.paths << ',' << row.failures << '\n';
    }
    dir.write("control.csv", csv.str());
    std::vector<Verdict> cv;
    for (int p : r.study.p) cv.push_back(no_trend_verdict(ctable, p));
    report += "\n## Control run with f(x, y) replaced by f(x, 0)\n\n";
    std::ostringstream s;
    for (const auto& v : cv) s << "- **" << (v.pass ? "PASS" : "FAIL") << "** " << v.name << ": " << v.detail << '\n';
    report += s.str();
    table.verdicts.insert(table.verdicts.end(), cv.begin(), cv.end());
  }
  write_results(dir.path(), table);
  dir.add_existing();
  dir.write("report.md", report);
  if (cfg.dump_paths > 0) {
    for (const auto& e : fs::directory_iterator(cfg.dump_directory)) dir.add("paths/" + e.path().filename().string());
  }
  print_verdicts(out, table.verdicts);
  return all_pass(table.verdicts);
}

bool cmd_khasminskii(const Resolved& r, OutputDir& dir, std::ostream& out) {
  const KhasminskiiTable table = khasminskii_study(r.model, r.study);
  write_results(dir.path(), table);
  dir.add_existing();
  dir.write("report.md", render_report("Khasminskii auxiliary gap: " + r.model.name, table));
  print_verdicts(out, table.verdicts);
  return all_pass(table.verdicts);
}

bool cmd_window(const Resolved& r, OutputDir& dir, std::ostream& out) {
  const AveragedCoefficient fbar = obtain_fbar(r, dir, out);
  const WindowTable table = averaging_window_study(r.model, fbar, r.study);
  write_results(dir.path(), table);
  dir.add_existing();
  dir.write("report.md", render_report("Averaging window functional: " + r.model.name, table));
  print_verdicts(out, table.verdicts);
  return all_pass(table.verdicts);
}

bool cmd_moments(const Resolved& r, OutputDir& dir, std::ostream& out) {
  const MomentTable table = moment_and_regularity_study(r.model, r.study);
  write_results(dir.path(), table);
  dir.add_existing();
  dir.write("report.md", render_report("Moment bounds and regularity: " + r.model.name, table));
  print_verdicts(out, table.verdicts);
  return all_pass(table.verdicts);
}

using Command = bool (*)(const Resolved&, OutputDir&, std::ostream&);

struct SubcommandSpec {
  const char* name;
  const char* help;
  Command fn;
};

constexpr SubcommandSpec kSubcommands[] = {
    {"hypotheses", "Audit the dissipativity, Lipschitz and growth hypotheses on a box", cmd_hypotheses},
    {"average", "Fit the averaged drift table (and optionally cache it)", cmd_average},
    {"simulate", "Simulate one coupled path and its reduced counterpart", cmd_simulate},
    {"converge", "Strong averaging error study over an epsilon grid", cmd_converge},
    {"khasminskii", "Gap between the coupled and the blockwise auxiliary processes", cmd_khasminskii},
    {"window", "Averaging window functional against delta/eps", cmd_window},
    {"moments", "Uniform moment and fractional regularity bounds", cmd_moments},
    {"validate-noise", "Empirical against analytic characteristic function", cmd_validate_noise},
};

void add_common_options(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "JSON config, a previous study.json or manifest.json");
  sub.add_option("--model", f.model, "builtin:<name>, a JSON file or inline JSON");
  sub.add_option("--eps", f.eps, "epsilon grid, e.g. 2^-4..2^-9 or 0.1,0.05");
  sub.add_option("--p", f.p, "moment orders, e.g. 1,2");
  sub.add_option("--paths", f.paths, "Monte Carlo paths per epsilon");
  sub.add_option("--seed", f.seed, "master seed");
  sub.add_option("--horizon", f.horizon, "slow horizon T");
  sub.add_option("--step", f.step, "slow step h");
  sub.add_option("--natural-step", f.natural_step, "fast step in natural time t/eps");
  sub.add_option("--delta-rule", f.delta_rule, "khasminskii or fixed:<v>");
  sub.add_option("--fbar-cache", f.fbar_cache, "read the f-bar table from this file, or write it there");
  sub.add_option("--out", f.out, "output root (default runs)");
  sub.add_option("--threads", f.threads, "worker threads (fallback LEVYAVG_THREADS)");
  sub.add_option("--dump-paths", f.dump_paths, "write the first N coupled/reduced trajectories");
  sub.add_option("--box", f.box, "sample box lo..hi");
  sub.add_option("--nodes", f.nodes, "f-bar table nodes");
  sub.add_option("--replicas", f.replicas, "f-bar replicas per node");
  sub.add_option("--fbar-horizon", f.fbar_horizon, "f-bar averaging window");
  sub.add_option("--fbar-burn-in", f.fbar_burn_in, "f-bar burn-in");
  sub.add_option("--fbar-step", f.fbar_step, "f-bar frozen step");
  sub.add_option("--samples", f.samples, "sample count (hypotheses, validate-noise)");
  sub.add_option("--tol", f.tol, "pass tolerance");
  sub.add_option("--alphas", f.alphas, "fractional exponents, e.g. 0,0.1");
  sub.add_option("--ratios", f.ratios, "window ratios delta/eps, e.g. 1,2,4,8");
  sub.add_option("--window-eps", f.window_eps, "epsilon of the window study");
  sub.add_option("--window-samples", f.window_samples, "starting pairs of the window study");
  sub.add_option("--multipliers", f.multipliers, "block multiples of delta(eps) for khasminskii");
  sub.add_option("--bounded-factor", f.bounded_factor, "max/min limit for the moment verdicts");
  sub.add_option("--triplet", f.triplet, "drift,sigma,measure[,cutoff]");
  sub.add_option("--theta-grid", f.theta_grid, "theta range lo..hi");
  sub.add_option("--theta-step", f.theta_step, "theta spacing");
  sub.add_option("--path", f.path_index, "path index for simulate");
  sub.add_flag("--no-control", f.no_control, "skip the y-free control run");
}

int execute(const SubcommandSpec& spec, const Flags& flags, std::ostream& out) {
  RunManifest manifest;
  manifest.started_at = utc_now();
  const Resolved r = resolve(spec.name, flags);
  r.study.validate();
  const json doc = r.doc();
  manifest.subcommand = spec.name;
  manifest.config = doc;
  manifest.config_hash = config_hash(doc);
  manifest.seed = r.study.seed;
  manifest.tool_version = LEVYAVG_VERSION;
  OutputDir dir(fs::path(flags.out) / (std::string(spec.name) + "-" + manifest.config_hash.substr(0, 12)));
  dir.write("study.json", doc.dump(2) + "\n");

  const std::uint64_t frozen_before = frozen_run_count();
  const bool pass = spec.fn(r, dir, out);
  manifest.frozen_runs = frozen_run_count() - frozen_before;
  manifest.exit_code = pass ? kExitOk : kExitVerdict;
  manifest.finished_at = utc_now();
  manifest.output_dir = dir.path();
  manifest.outputs = dir.files();
  std::ofstream(dir.path() / "manifest.json") << manifest.to_json().dump(2) << '\n';
  out << "output: " << dir.path().string() << '\n';
  out << "frozen runs: " << manifest.frozen_runs << '\n';
  return manifest.exit_code;
}

}  // namespace

LevyTriplet parse_triplet(const std::string& text) {
  LevyTriplet t;
  auto measure_from = [](const std::string& m, double cutoff) {
    if (m == "none") return JumpMeasure::none(cutoff);
    auto fields = [](const std::string& s, char sep) {
      std::vector<std::string> out;
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, sep)) out.push_back(item);
      return out;
    };
    auto num = [](const std::string& s) {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    };
    if (m.starts_with("uniform:")) {
      const auto f = fields(m.substr(8), ':');
      if (f.size() != 3) throw Error(ErrorCode::kInvalidConfig, "uniform measure needs rate:lo:hi");
      return JumpMeasure::uniform(num(f[0]), num(f[1]), num(f[2]), cutoff);
    }
    if (m.starts_with("atoms:")) {
      std::vector<JumpAtom> atoms;
      for (const auto& a : fields(m.substr(6), ';')) {
        const auto f = fields(a, '@');
        if (f.size() != 2) throw Error(ErrorCode::kInvalidConfig, "atom must read size@mass");
        atoms.push_back({num(f[0]), num(f[1])});
      }
      return JumpMeasure::atoms(std::move(atoms), cutoff);
    }
    throw Error(ErrorCode::kInvalidConfig, "unknown measure '" + m + "'");
  };
  try {
    if (!text.empty() && text.front() == '{') {
      const json j = json::parse(text);
      t.drift = j.value("drift", 0.0);
      t.sigma = j.value("sigma", 0.0);
      t.cutoff = j.value("cutoff", 1.0);
      if (j.contains("measure")) t.measure = JumpMeasure::from_config(j.at("measure"));
    } else {
      std::vector<std::string> parts;
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) parts.push_back(item);
      if (parts.size() < 3 || parts.size() > 4) {
        throw Error(ErrorCode::kInvalidConfig, "triplet must read drift,sigma,measure[,cutoff]");
      }
      t.drift = std::stod(parts[0]);
      t.sigma = std::stod(parts[1]);
      if (parts.size() == 4) t.cutoff = std::stod(parts[3]);
      t.measure = measure_from(parts[2], kInfiniteCutoff);
    }
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::kInvalidConfig, "cannot parse triplet '" + text + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("triplet JSON: ") + e.what());
  }
  t.validate();
  return t;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-timescale Levy-driven averaging studies", "levyavg"};
  app.set_version_flag("--version", LEVYAVG_VERSION);
  app.require_subcommand(1);
  Flags flags;
  std::vector<std::pair<CLI::App*, const SubcommandSpec*>> subs;
  for (const auto& spec : kSubcommands) {
    CLI::App* sub = app.add_subcommand(spec.name, spec.help);
    add_common_options(*sub, flags);
    subs.emplace_back(sub, &spec);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << LEVYAVG_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  for (const auto& [sub, spec] : subs) {
    if (!sub->parsed()) continue;
    try {
      return execute(*spec, flags, out);
    } catch (const NoInput& e) {
      err << "error: " << e.what() << '\n';
      return kExitNoInput;
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      if (e.code() == ErrorCode::kStaleCache) return kExitStaleCache;
      if (e.code() == ErrorCode::kInvalidConfig) {
        err << "run `levyavg " << spec->name << " --help` for usage\n";
        return kExitUsage;
      }
      return kExitError;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitError;
    }
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace levyavg::cli
