#include "levyavg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "levyavg/error.hpp"
#include "levyavg/parallel.hpp"
#include "levyavg/stats.hpp"

namespace levyavg {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double combined(double a, double b) { return std::sqrt(a * a + b * b); }

std::vector<std::size_t> descending_eps_order(const std::vector<double>& eps) {
  std::vector<std::size_t> idx(eps.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return eps[a] > eps[b]; });
  return idx;
}

void write_file(const std::filesystem::path& file, const std::string& content) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidConfig, "cannot write " + file.string());
  out << content;
}

std::string verdict_lines(const std::vector<Verdict>& verdicts) {
  std::ostringstream s;
  for (const auto& v : verdicts) s << "- **" << (v.pass ? "PASS" : "FAIL") << "** " << v.name << ": " << v.detail << '\n';
  return s.str();
}

std::size_t block_steps_for(double delta, const TimeGrid& grid) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(delta / grid.h())));
}

/// Bound shape Δ^{2α} + ε/Δ + Δ^{2pα+1}/ε·e^{Δ/ε} at Δ = ε√(−ln ε) with
/// α = 1/(8p); only the trend is meaningful.
double bound_shape(double eps, int p) {
  const double delta = eps * std::sqrt(-std::log(eps));
  const double alpha = 1.0 / (8.0 * p);
  return std::pow(delta, 2.0 * alpha) + eps / delta +
         std::pow(delta, 2.0 * p * alpha + 1.0) / eps * std::exp(delta / eps);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

double DeltaRule::operator()(double eps) const {
  if (kind == Kind::kFixed) return fixed;
  return eps * std::sqrt(-std::log(eps));
}

DeltaRule DeltaRule::parse(const std::string& text) {
  DeltaRule r;
  if (text == "khasminskii") return r;
  if (text.starts_with("fixed:")) {
    try {
      std::size_t used = 0;
      const std::string v = text.substr(6);
      r.fixed = std::stod(v, &used);
      if (used != v.size() || !(r.fixed > 0.0)) throw std::invalid_argument("bad");
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidConfig, "bad delta rule '" + text + "'");
    }
    r.kind = Kind::kFixed;
    return r;
  }
  throw Error(ErrorCode::kInvalidConfig, "delta rule must be 'khasminskii' or 'fixed:<v>', got '" + text + "'");
}

std::string DeltaRule::to_string() const {
  return kind == Kind::kKhasminskii ? "khasminskii" : "fixed:" + format_number(fixed);
}

TimeGrid StudyConfig::grid_for(double eps) const {
  return TimeGrid::for_epsilon(horizon, h, resolved_natural_step(), eps);
}

void StudyConfig::validate() const {
  if (eps.empty()) throw Error(ErrorCode::kInvalidConfig, "epsilon list is empty");
  for (double e : eps) {
    if (!(e > 0.0 && e < 1.0)) throw Error(ErrorCode::kInvalidConfig, "every epsilon must lie in (0, 1)");
    if (!(delta_rule(e) < horizon)) throw Error(ErrorCode::kInvalidConfig, "delta(eps) must be below the horizon");
  }
  if (paths < 2) throw Error(ErrorCode::kInvalidConfig, "need at least 2 paths");
  if (p.empty()) throw Error(ErrorCode::kInvalidConfig, "p list is empty");
  for (int q : p) {
    if (q < 1 || q > 3) throw Error(ErrorCode::kInvalidConfig, "p must lie in {1, 2, 3}");
  }
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "alpha must lie in [0, 1]");
  }
  TimeGrid::make(horizon, h, h);
  if (natural_step && !(*natural_step > 0.0)) throw Error(ErrorCode::kInvalidConfig, "natural step must be > 0");
  if (window_ratios.empty()) throw Error(ErrorCode::kInvalidConfig, "window ratio list is empty");
}

nlohmann::json StudyConfig::to_json() const {
  nlohmann::json j;
  j["eps"] = eps;
  j["p"] = p;
  j["paths"] = paths;
  j["horizon"] = horizon;
  j["h"] = h;
  j["natural_step"] = resolved_natural_step();
  j["delta_rule"] = delta_rule.to_string();
  j["seed"] = seed;
  nlohmann::json fb;
  fb["box"] = {fbar_box.lo, fbar_box.hi};
  fb["nodes"] = fbar_nodes;
  fb["burn_in"] = fbar.burn_in ? nlohmann::json(*fbar.burn_in) : nlohmann::json(nullptr);
  fb["horizon"] = fbar.horizon;
  fb["replicas"] = fbar.replicas;
  fb["step"] = fbar.step;
  fb["seed"] = fbar.seed;
  j["fbar"] = fb;
  j["khasminskii"] = {{"delta_multipliers", delta_multipliers}};
  j["window"] = {{"eps", window_eps}, {"ratios", window_ratios}, {"samples", window_samples}};
  j["moments"] = {{"alphas", alphas}, {"bounded_factor", bounded_factor}};
  j["dump_paths"] = dump_paths;
  return j;
}

StudyConfig StudyConfig::from_json(const nlohmann::json& j) {
  StudyConfig c;
  try {
    if (j.contains("eps")) {
      const auto& e = j.at("eps");
      c.eps = e.is_string() ? parse_eps_list(e.get<std::string>()) : e.get<std::vector<double>>();
    }
    if (j.contains("p")) c.p = j.at("p").is_number() ? std::vector<int>{j.at("p").get<int>()} : j.at("p").get<std::vector<int>>();
    if (j.contains("paths")) c.paths = j.at("paths").get<std::size_t>();
    if (j.contains("horizon")) c.horizon = j.at("horizon").get<double>();
    if (j.contains("h")) c.h = j.at("h").get<double>();
    if (j.contains("natural_step") && !j.at("natural_step").is_null()) c.natural_step = j.at("natural_step").get<double>();
    if (j.contains("delta_rule")) c.delta_rule = DeltaRule::parse(j.at("delta_rule").get<std::string>());
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (j.contains("fbar")) {
      const auto& fb = j.at("fbar");
      if (fb.contains("box")) c.fbar_box = {fb.at("box").at(0).get<double>(), fb.at("box").at(1).get<double>()};
      if (fb.contains("nodes")) c.fbar_nodes = fb.at("nodes").get<std::size_t>();
      if (fb.contains("burn_in") && !fb.at("burn_in").is_null()) c.fbar.burn_in = fb.at("burn_in").get<double>();
      if (fb.contains("horizon")) c.fbar.horizon = fb.at("horizon").get<double>();
      if (fb.contains("replicas")) c.fbar.replicas = fb.at("replicas").get<std::size_t>();
      if (fb.contains("step")) c.fbar.step = fb.at("step").get<double>();
      if (fb.contains("seed")) c.fbar.seed = fb.at("seed").get<std::uint64_t>();
    }
    if (j.contains("khasminskii") && j.at("khasminskii").contains("delta_multipliers")) {
      c.delta_multipliers = j.at("khasminskii").at("delta_multipliers").get<std::vector<double>>();
    }
    if (j.contains("window")) {
      const auto& w = j.at("window");
      if (w.contains("eps")) {
        const auto& e = w.at("eps");
        c.window_eps = e.is_string() ? parse_eps_list(e.get<std::string>()).at(0) : e.get<double>();
      }
      if (w.contains("ratios")) c.window_ratios = w.at("ratios").get<std::vector<double>>();
      if (w.contains("samples")) c.window_samples = w.at("samples").get<std::size_t>();
    }
    if (j.contains("moments")) {
      const auto& m = j.at("moments");
      if (m.contains("alphas")) c.alphas = m.at("alphas").get<std::vector<double>>();
      if (m.contains("bounded_factor")) c.bounded_factor = m.at("bounded_factor").get<double>();
    }
    if (j.contains("dump_paths")) c.dump_paths = j.at("dump_paths").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("study config: ") + e.what());
  }
  return c;
}

namespace {

double parse_term(const std::string& raw) {
  std::string s;
  for (char ch : raw) {
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  }
  try {
    std::size_t used = 0;
    if (s.starts_with("2^")) {
      const int e = std::stoi(s.substr(2), &used);
      if (used != s.size() - 2) throw std::invalid_argument("trailing");
      return std::ldexp(1.0, e);
    }
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kInvalidConfig, "cannot parse number '" + raw + "'");
  }
}

}  // namespace

std::vector<double> parse_eps_list(const std::string& text) {
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
    if (!a.starts_with("2^") || !b.starts_with("2^")) {
      throw Error(ErrorCode::kInvalidConfig, "epsilon ranges must be dyadic, e.g. 2^-4..2^-9");
    }
    const int ea = static_cast<int>(std::lround(std::log2(parse_term(a))));
    const int eb = static_cast<int>(std::lround(std::log2(parse_term(b))));
    std::vector<double> out;
    const int stepdir = ea <= eb ? 1 : -1;
    for (int e = ea;; e += stepdir) {
      out.push_back(std::ldexp(1.0, e));
      if (e == eb) break;
    }
    return out;
  }
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_term(item));
  if (out.empty()) throw Error(ErrorCode::kInvalidConfig, "empty epsilon list");
  return out;
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw Error(ErrorCode::kInvalidConfig, "expected lo..hi, got '" + text + "'");
  const double lo = parse_term(text.substr(0, dots));
  const double hi = parse_term(text.substr(dots + 2));
  if (!(hi > lo)) throw Error(ErrorCode::kInvalidConfig, "range '" + text + "' is empty");
  return {lo, hi};
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

bool all_pass(const std::vector<Verdict>& verdicts) {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

AveragedCoefficient build_study_fbar(const SlowFastModel& model, const StudyConfig& cfg) {
  FbarConfig fc = cfg.fbar;
  fc.threads = cfg.threads;
  return build_fbar_table(model, cfg.fbar_box, cfg.fbar_nodes, fc);
}

// ---------------------------------------------------------------------------
// Strong error

std::vector<ConvergenceRow> ConvergenceTable::rows_for(int p) const {
  std::vector<ConvergenceRow> out;
  for (const auto& r : rows) {
    if (r.p == p) out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.eps > b.eps; });
  return out;
}

ConvergenceTable strong_error_study(const SlowFastModel& model, const FbarMap& fbar, const StudyConfig& cfg) {
  cfg.validate();
  const std::size_t E = cfg.eps.size(), M = cfg.paths, P = cfg.p.size();
  struct Cell {
    bool ok = false;
    std::vector<double> err;  // per p
    bool coupling_ok = true;
    std::uint64_t domain_exceeded = 0;
    double wall_ms = 0.0;
  };
  std::vector<Cell> cells(E * M);
  if (cfg.dump_paths > 0 && !cfg.dump_dir().empty()) std::filesystem::create_directories(cfg.dump_dir());

  parallel_for(E * M, cfg.threads, [&](std::size_t c) {
    const auto start = Clock::now();
    const std::size_t e = c / M;
    const auto path = static_cast<std::uint32_t>(c % M);
    const double eps = cfg.eps[e];
    Cell& cell = cells[c];
    try {
      const SlowFastModel m = model.with_epsilon(eps);
      const NoiseBundle noise = generate_noise(m, cfg.grid_for(eps), cfg.seed, path);
      const PathPair coupled = simulate_coupled(m, noise);
      const PathPair reduced = simulate_reduced(m, fbar, noise.slow);
      cell.coupling_ok = reduced.usage.w1_increments == coupled.usage.w1_increments &&
                         reduced.usage.n1_events == coupled.usage.n1_events && reduced.usage.w2_increments == 0 &&
                         reduced.usage.n2_events == 0;
      cell.domain_exceeded = reduced.domain_exceeded;
      for (int p : cfg.p) cell.err.push_back(sup_distance(coupled, reduced, 2.0 * p));
      if (path < cfg.dump_paths && !cfg.dump_dir().empty()) {
        const std::string stem = "eps-" + format_number(eps) + "_path-" + std::to_string(path);
        write_trajectory_csv(cfg.dump_dir() / (stem + "_coupled.csv"), coupled);
        write_trajectory_csv(cfg.dump_dir() / (stem + "_reduced.csv"), reduced);
      }
      cell.ok = true;
    } catch (const BlowUpError&) {
      cell.ok = false;
    }
    cell.wall_ms = elapsed_ms(start);
  });

  ConvergenceTable table;
  for (std::size_t e = 0; e < E; ++e) {
    std::vector<MomentAccumulator> acc(P);
    std::size_t failures = 0;
    std::uint64_t domain = 0;
    double wall = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const Cell& cell = cells[e * M + m];
      wall += cell.wall_ms;
      if (!cell.ok) {
        ++failures;
        continue;
      }
      if (!cell.coupling_ok) ++table.coupling_mismatches;
      domain += cell.domain_exceeded;
      for (std::size_t i = 0; i < P; ++i) acc[i].add(cell.err[i]);
    }
    for (std::size_t i = 0; i < P; ++i) {
      ConvergenceRow row;
      row.eps = cfg.eps[e];
      row.p = cfg.p[i];
      row.delta = cfg.delta_rule(cfg.eps[e]);
      row.error = acc[i].mean();
      row.std_error = acc[i].std_error();
      row.paths = acc[i].count;
      row.failures = failures;
      row.wall_ms = wall;
      row.domain_exceeded = domain;
      table.rows.push_back(row);
    }
  }

  for (int p : cfg.p) {
    const auto rows = table.rows_for(p);
    std::vector<double> lx, ly, lb;
    for (const auto& r : rows) {
      if (r.error > 0.0) {
        lx.push_back(std::log(r.eps));
        ly.push_back(std::log(r.error));
        lb.push_back(std::log(r.error) - std::log(bound_shape(r.eps, p)));
      }
    }
    if (lx.size() >= 2) {
      table.slopes.emplace_back(p, fit_line(lx, ly).slope);
      double mean = 0.0, ss = 0.0;
      for (double v : lb) mean += v;
      mean /= static_cast<double>(lb.size());
      for (double v : lb) ss += (v - mean) * (v - mean);
      table.bound_shape_constant.emplace_back(p, std::exp(mean));
      table.bound_shape_residual.emplace_back(p, std::sqrt(ss / static_cast<double>(lb.size())));
    }
    if (rows.size() >= 2) {
      bool decreasing = true;
      std::ostringstream detail;
      for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        const double slack = 2.0 * combined(rows[i].std_error, rows[i + 1].std_error);
        if (!(rows[i + 1].error <= rows[i].error + slack)) {
          decreasing = false;
          detail << "E(" << format_number(rows[i + 1].eps) << ")=" << format_number(rows[i + 1].error) << " > E("
                 << format_number(rows[i].eps) << ")=" << format_number(rows[i].error) << " + 2 sigma; ";
        }
      }
      table.verdicts.push_back({"p=" + std::to_string(p) + " error decreasing in eps within MC error", decreasing,
                                decreasing ? "every halving step within 2 combined standard errors" : detail.str()});
      const double ratio = rows.back().error / rows.front().error;
      table.verdicts.push_back({"p=" + std::to_string(p) + " E(eps_min)/E(eps_max) < 0.3", ratio < 0.3,
                                "ratio = " + format_number(ratio)});
    }
  }
  table.verdicts.push_back({"reduced run reads exactly the coupled W1/N1 and no fast noise",
                            table.coupling_mismatches == 0,
                            std::to_string(table.coupling_mismatches) + " mismatching cells"});
  return table;
}

Verdict no_trend_verdict(const ConvergenceTable& table, int p) {
  const auto rows = table.rows_for(p);
  double worst = 0.0;
  bool pass = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      const double gap = std::abs(rows[i].error - rows[j].error);
      const double slack = 3.0 * combined(rows[i].std_error, rows[j].std_error);
      worst = std::max(worst, gap - slack);
      if (gap > slack) pass = false;
    }
  }
  return {"p=" + std::to_string(p) + " control run shows no eps-trend", pass,
          pass ? "all eps pairs agree within 3 combined standard errors"
               : "largest excess over 3 sigma = " + format_number(worst)};
}

// ---------------------------------------------------------------------------
// Khasminskii

KhasminskiiTable khasminskii_study(const SlowFastModel& model, const StudyConfig& cfg) {
  cfg.validate();
  const std::size_t E = cfg.eps.size(), M = cfg.paths, P = cfg.p.size();

  // Δ list per ε: the one-step block plus multiples of Δ(ε), on the grid
  std::vector<std::vector<std::size_t>> blocks(E);
  std::vector<std::size_t> rule_block(E);
  for (std::size_t e = 0; e < E; ++e) {
    const TimeGrid grid = cfg.grid_for(cfg.eps[e]);
    rule_block[e] = block_steps_for(cfg.delta_rule(cfg.eps[e]), grid);
    std::set<std::size_t> s{1, rule_block[e]};
    for (double mult : cfg.delta_multipliers) s.insert(block_steps_for(mult * cfg.delta_rule(cfg.eps[e]), grid));
    blocks[e].assign(s.begin(), s.end());
  }

  struct Cell {
    bool ok = false;
    std::vector<double> x_gap;  // [block][p]
    std::vector<double> y_gap;  // [block][p][regular node]
    double wall_ms = 0.0;
  };
  std::vector<Cell> cells(E * M);
  parallel_for(E * M, cfg.threads, [&](std::size_t c) {
    const auto start = Clock::now();
    const std::size_t e = c / M;
    const auto path = static_cast<std::uint32_t>(c % M);
    Cell& cell = cells[c];
    try {
      const SlowFastModel m = model.with_epsilon(cfg.eps[e]);
      const TimeGrid grid = cfg.grid_for(cfg.eps[e]);
      const NoiseBundle noise = generate_noise(m, grid, cfg.seed, path);
      const PathPair coupled = simulate_coupled(m, noise);
      const std::size_t R = coupled.regular.size();
      for (std::size_t b : blocks[e]) {
        const AuxiliaryPath aux = simulate_auxiliary(m, static_cast<double>(b) * grid.h(), noise, coupled);
        const int d = m.dim();
        double xmax2 = 0.0;
        for (std::size_t i = 0; i < coupled.nodes(); ++i) {
          double s = 0.0;
          for (int k = 0; k < d; ++k) {
            const double g = coupled.x[i * d + k] - aux.x_hat[i * d + k];
            s += g * g;
          }
          xmax2 = std::max(xmax2, s);
        }
        for (int p : cfg.p) cell.x_gap.push_back(std::pow(xmax2, p));
        for (int p : cfg.p) {
          for (std::size_t r = 0; r < R; ++r) {
            const std::size_t i = coupled.regular[r];
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
              const double g = coupled.y[i * d + k] - aux.y_hat[i * d + k];
              s += g * g;
            }
            cell.y_gap.push_back(std::pow(s, p));
          }
        }
      }
      cell.ok = true;
    } catch (const BlowUpError&) {
      cell.ok = false;
    }
    cell.wall_ms = elapsed_ms(start);
  });

  KhasminskiiTable table;
  for (std::size_t e = 0; e < E; ++e) {
    const TimeGrid grid = cfg.grid_for(cfg.eps[e]);
    const std::size_t R = grid.n_slow + 1;
    const std::size_t B = blocks[e].size();
    for (std::size_t bi = 0; bi < B; ++bi) {
      for (std::size_t pi = 0; pi < P; ++pi) {
        MomentAccumulator xacc;
        std::vector<MomentAccumulator> yacc(R);
        std::size_t failures = 0;
        double wall = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
          const Cell& cell = cells[e * M + m];
          wall += cell.wall_ms;
          if (!cell.ok) {
            ++failures;
            continue;
          }
          xacc.add(cell.x_gap[bi * P + pi]);
          const double* y = cell.y_gap.data() + (bi * P + pi) * R;
          for (std::size_t r = 0; r < R; ++r) yacc[r].add(y[r]);
        }
        KhasminskiiRow row;
        row.eps = cfg.eps[e];
        row.block_steps = blocks[e][bi];
        row.delta = static_cast<double>(row.block_steps) * grid.h();
        row.rule_delta = row.block_steps == rule_block[e];
        row.p = cfg.p[pi];
        row.x_gap = xacc.mean();
        row.x_gap_stderr = xacc.std_error();
        double mean_sum = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
          const double v = yacc[r].mean();
          mean_sum += v;
          if (v > row.y_gap) {
            row.y_gap = v;
            row.y_gap_stderr = yacc[r].std_error();
          }
        }
        row.y_gap_mean = mean_sum / static_cast<double>(R);
        row.paths = xacc.count;
        row.failures = failures;
        row.wall_ms = wall / static_cast<double>(B * P);
        table.rows.push_back(row);
      }
    }
  }

  for (int p : cfg.p) {
    std::vector<KhasminskiiRow> rule;
    for (const auto& r : table.rows) {
      if (r.p == p && r.rule_delta) rule.push_back(r);
    }
    std::stable_sort(rule.begin(), rule.end(), [](const auto& a, const auto& b) { return a.eps > b.eps; });
    bool ok = true;
    std::ostringstream detail;
    for (std::size_t i = 0; i + 1 < rule.size(); ++i) {
      if (!(rule[i + 1].x_gap <= rule[i].x_gap + 2.0 * combined(rule[i].x_gap_stderr, rule[i + 1].x_gap_stderr))) {
        ok = false;
        detail << "gap rises from eps=" << format_number(rule[i].eps) << " to " << format_number(rule[i + 1].eps) << "; ";
      }
    }
    table.verdicts.push_back({"p=" + std::to_string(p) + " X-gap at delta(eps) does not increase as eps halves", ok,
                              ok ? "within 2 combined standard errors" : detail.str()});

    bool mono = true;
    std::ostringstream ydetail;
    for (double eps : cfg.eps) {
      std::vector<KhasminskiiRow> rows;
      for (const auto& r : table.rows) {
        if (r.p == p && r.eps == eps) rows.push_back(r);
      }
      for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
        if (!(rows[i + 1].y_gap >= rows[i].y_gap - 2.0 * combined(rows[i].y_gap_stderr, rows[i + 1].y_gap_stderr))) {
          mono = false;
          ydetail << "eps=" << format_number(eps) << " drops at delta=" << format_number(rows[i + 1].delta) << "; ";
        }
      }
    }
    table.verdicts.push_back({"p=" + std::to_string(p) + " Y-gap nondecreasing in delta", mono,
                              mono ? "within 2 combined standard errors" : ydetail.str()});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Averaging window

WindowTable averaging_window_study(const SlowFastModel& model, const FbarMap& fbar, const StudyConfig& cfg) {
  cfg.validate();
  const double eps = cfg.window_eps;
  const SlowFastModel m = model.with_epsilon(eps);
  const TimeGrid grid = cfg.grid_for(eps);
  const std::size_t block = block_steps_for(cfg.delta_rule(eps), grid);
  const std::size_t per_path = grid.n_slow / block;
  if (per_path == 0) throw Error(ErrorCode::kInvalidBlock, "block longer than the horizon");
  const std::size_t n_paths = (cfg.window_samples + per_path - 1) / per_path;
  const int d = m.dim();

  // starting pairs at block boundaries k·Δ, k >= 1
  std::vector<std::vector<double>> starts(n_paths);
  std::vector<char> path_ok(n_paths, 1);
  parallel_for(n_paths, cfg.threads, [&](std::size_t j) {
    try {
      const NoiseBundle noise = generate_noise(m, grid, cfg.seed, static_cast<std::uint32_t>(j));
      const PathPair coupled = simulate_coupled(m, noise);
      for (std::size_t k = 1; k <= per_path; ++k) {
        const std::size_t node = coupled.regular[k * block];
        for (int c = 0; c < d; ++c) starts[j].push_back(coupled.x[node * d + c]);
        for (int c = 0; c < d; ++c) starts[j].push_back(coupled.y[node * d + c]);
      }
    } catch (const BlowUpError&) {
      path_ok[j] = 0;
    }
  });
  std::vector<std::vector<double>> pairs;
  WindowTable table;
  table.eps = eps;
  for (std::size_t j = 0; j < n_paths; ++j) {
    if (!path_ok[j]) {
      ++table.failures;
      continue;
    }
    for (std::size_t k = 0; k < per_path && pairs.size() < cfg.window_samples; ++k) {
      pairs.emplace_back(starts[j].begin() + 2 * d * k, starts[j].begin() + 2 * d * (k + 1));
    }
  }

  const auto& ratios = cfg.window_ratios;
  const double tau_max = *std::max_element(ratios.begin(), ratios.end());
  const double step = cfg.resolved_natural_step();
  const auto lambda = m.space.eigenvalues();
  const std::size_t S = pairs.size(), Q = ratios.size();
  std::vector<double> values(S * Q, 0.0);
  std::vector<char> ok(S, 1);
  parallel_for(S, cfg.threads, [&](std::size_t s) {
    const std::span<const double> x(pairs[s].data(), d), y0(pairs[s].data() + d, d);
    std::vector<double> target(d);
    for (int c = 0; c < d; ++c) target[c] = fbar.value(c, x[c]);
    std::vector<double> integral(Q * d, 0.0);
    RandomStream brownian(cfg.seed, StreamKind::kWindow, static_cast<std::uint32_t>(2 * s));
    RandomStream jumps(cfg.seed, StreamKind::kWindow, static_cast<std::uint32_t>(2 * s + 1));
    try {
      run_frozen(m, x, y0, tau_max, step, brownian, jumps, [&](double u, double v, std::span<const double> y) {
        for (std::size_t q = 0; q < Q; ++q) {
          const double tau = ratios[q];
          if (u >= tau) continue;
          const double hi = std::min(v, tau);
          for (int c = 0; c < d; ++c) {
            // ∫_u^hi e^{-λ ε (τ - r)} dr
            const double le = lambda[c] * eps;
            const double w = (std::exp(-le * (tau - hi)) - std::exp(-le * (tau - u))) / le;
            integral[q * d + c] += w * (m.coeffs.f(x[c], y[c]) - target[c]);
          }
        }
      });
    } catch (const BlowUpError&) {
      ok[s] = 0;
      return;
    }
    for (std::size_t q = 0; q < Q; ++q) {
      double n2 = 0.0;
      for (int c = 0; c < d; ++c) n2 += integral[q * d + c] * integral[q * d + c];
      values[s * Q + q] = n2;
    }
  });

  std::vector<double> lx, ly;
  for (std::size_t q = 0; q < Q; ++q) {
    MomentAccumulator acc;
    for (std::size_t s = 0; s < S; ++s) {
      if (ok[s]) acc.add(values[s * Q + q]);
    }
    table.rows.push_back({ratios[q], acc.mean(), acc.std_error(), acc.count});
    if (acc.mean() > 0.0) {
      lx.push_back(std::log(ratios[q]));
      ly.push_back(std::log(acc.mean()));
    }
  }
  for (std::size_t s = 0; s < S; ++s) table.failures += ok[s] ? 0 : 1;
  if (lx.size() >= 2) {
    table.slope = fit_line(lx, ly).slope;
    table.verdicts.push_back({"window functional log-log slope in [0.7, 1.3]", table.slope >= 0.7 && table.slope <= 1.3,
                              "slope = " + format_number(table.slope)});
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : table.rows) {
      lo = std::min(lo, r.value / r.ratio);
      hi = std::max(hi, r.value / r.ratio);
    }
    table.verdicts.push_back({"value/(delta/eps) stable within a factor 2", hi < 2.0 * lo,
                              "max/min = " + format_number(hi / lo)});
  } else {
    table.verdicts.push_back({"window functional log-log slope in [0.7, 1.3]", false, "functional vanished"});
  }
  return table;
}

// ---------------------------------------------------------------------------
// Moments and regularity

MomentTable moment_and_regularity_study(const SlowFastModel& model, const StudyConfig& cfg) {
  cfg.validate();
  const std::size_t E = cfg.eps.size(), M = cfg.paths, P = cfg.p.size();
  const std::vector<double> alphas = cfg.alphas.empty() ? std::vector<double>{0.0} : cfg.alphas;
  const std::size_t A = alphas.size();

  struct Cell {
    bool ok = false;
    std::vector<double> x_sup;  // [p][alpha]
    std::vector<double> x_pt;   // [p][alpha][regular node]
    std::vector<double> y_pt;   // [p][regular node]
    double wall_ms = 0.0;
  };
  std::vector<Cell> cells(E * M);
  parallel_for(E * M, cfg.threads, [&](std::size_t c) {
    const auto start = Clock::now();
    const std::size_t e = c / M;
    const auto path = static_cast<std::uint32_t>(c % M);
    Cell& cell = cells[c];
    try {
      const SlowFastModel m = model.with_epsilon(cfg.eps[e]);
      const NoiseBundle noise = generate_noise(m, cfg.grid_for(cfg.eps[e]), cfg.seed, path);
      const PathPair coupled = simulate_coupled(m, noise);
      std::vector<double> xa(A * coupled.nodes());
      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t i = 0; i < coupled.nodes(); ++i) {
          xa[a * coupled.nodes() + i] = m.space.fractional_norm_unchecked(alphas[a], coupled.x_at(i));
        }
      }
      for (int p : cfg.p) {
        for (std::size_t a = 0; a < A; ++a) {
          double sup = 0.0;
          for (std::size_t i = 0; i < coupled.nodes(); ++i) sup = std::max(sup, xa[a * coupled.nodes() + i]);
          cell.x_sup.push_back(std::pow(sup, 2.0 * p));
        }
      }
      for (int p : cfg.p) {
        for (std::size_t a = 0; a < A; ++a) {
          for (std::size_t i : coupled.regular) cell.x_pt.push_back(std::pow(xa[a * coupled.nodes() + i], 2.0 * p));
        }
      }
      for (int p : cfg.p) {
        for (std::size_t i : coupled.regular) cell.y_pt.push_back(std::pow(norm(coupled.y_at(i)), 2.0 * p));
      }
      cell.ok = true;
    } catch (const BlowUpError&) {
      cell.ok = false;
    }
    cell.wall_ms = elapsed_ms(start);
  });

  MomentTable table;
  for (std::size_t e = 0; e < E; ++e) {
    const std::size_t R = cfg.grid_for(cfg.eps[e]).n_slow + 1;
    for (std::size_t pi = 0; pi < P; ++pi) {
      for (std::size_t a = 0; a < A; ++a) {
        MomentAccumulator sup;
        std::vector<MomentAccumulator> xpt(R), ypt(R);
        std::size_t failures = 0;
        double wall = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
          const Cell& cell = cells[e * M + m];
          wall += cell.wall_ms;
          if (!cell.ok) {
            ++failures;
            continue;
          }
          sup.add(cell.x_sup[pi * A + a]);
          for (std::size_t r = 0; r < R; ++r) {
            xpt[r].add(cell.x_pt[(pi * A + a) * R + r]);
            ypt[r].add(cell.y_pt[pi * R + r]);
          }
        }
        MomentRow row;
        row.eps = cfg.eps[e];
        row.p = cfg.p[pi];
        row.alpha = alphas[a];
        row.x_sup = sup.mean();
        row.x_sup_stderr = sup.std_error();
        for (std::size_t r = 0; r < R; ++r) {
          row.x_pointwise = std::max(row.x_pointwise, xpt[r].mean());
          row.y_pointwise = std::max(row.y_pointwise, ypt[r].mean());
        }
        row.paths = sup.count;
        row.failures = failures;
        row.wall_ms = wall / static_cast<double>(P * A);
        table.rows.push_back(row);
      }
    }
  }

  auto ratio_verdict = [&](const std::string& what, int p, double alpha, auto getter, bool with_alpha) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : table.rows) {
      if (r.p != p || r.alpha != alpha) continue;
      lo = std::min(lo, getter(r));
      hi = std::max(hi, getter(r));
    }
    const double ratio = hi / lo;
    std::string name = what + " p=" + std::to_string(p);
    if (with_alpha) name += " alpha=" + format_number(alpha);
    table.verdicts.push_back({name + " bounded across eps", ratio < cfg.bounded_factor,
                              "max/min = " + format_number(ratio) + " (limit " + format_number(cfg.bounded_factor) + ")"});
  };
  for (int p : cfg.p) {
    for (double alpha : alphas) {
      ratio_verdict("E sup ||X||_alpha^2p", p, alpha, [](const MomentRow& r) { return r.x_sup; }, true);
      ratio_verdict("sup E ||X||_alpha^2p", p, alpha, [](const MomentRow& r) { return r.x_pointwise; }, true);
    }
    ratio_verdict("sup E ||Y||^2p", p, alphas.front(), [](const MomentRow& r) { return r.y_pointwise; }, false);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Output

void write_results(const std::filesystem::path& dir, const ConvergenceTable& table) {
  std::ostringstream res, timing;
  res << "eps,p,delta,error,stderr,paths,failures,domain_exceeded\n";
  timing << "eps,p,wall_ms\n";
  for (const auto& r : table.rows) {
    res << format_number(r.eps) << ',' << r.p << ',' << format_number(r.delta) << ',' << format_number(r.error) << ','
        << format_number(r.std_error) << ',' << r.paths << ',' << r.failures << ',' << r.domain_exceeded << '\n';
    timing << format_number(r.eps) << ',' << r.p << ',' << format_number(r.wall_ms) << '\n';
  }
  write_file(dir / "results.csv", res.str());
  write_file(dir / "timing.csv", timing.str());
}

void write_results(const std::filesystem::path& dir, const KhasminskiiTable& table) {
  std::ostringstream res, timing;
  res << "eps,delta,block_steps,rule_delta,p,x_gap,x_gap_stderr,y_gap,y_gap_stderr,y_gap_mean,paths,failures\n";
  timing << "eps,delta,p,wall_ms\n";
  for (const auto& r : table.rows) {
    res << format_number(r.eps) << ',' << format_number(r.delta) << ',' << r.block_steps << ',' << (r.rule_delta ? 1 : 0)
        << ',' << r.p << ',' << format_number(r.x_gap) << ',' << format_number(r.x_gap_stderr) << ','
        << format_number(r.y_gap) << ',' << format_number(r.y_gap_stderr) << ',' << format_number(r.y_gap_mean) << ','
        << r.paths << ',' << r.failures << '\n';
    timing << format_number(r.eps) << ',' << format_number(r.delta) << ',' << r.p << ',' << format_number(r.wall_ms)
           << '\n';
  }
  write_file(dir / "results.csv", res.str());
  write_file(dir / "timing.csv", timing.str());
}

void write_results(const std::filesystem::path& dir, const WindowTable& table) {
  std::ostringstream res;
  res << "eps,ratio,value,stderr,samples\n";
  for (const auto& r : table.rows) {
    res << format_number(table.eps) << ',' << format_number(r.ratio) << ',' << format_number(r.value) << ','
        << format_number(r.std_error) << ',' << r.samples << '\n';
  }
  write_file(dir / "results.csv", res.str());
}

void write_results(const std::filesystem::path& dir, const MomentTable& table) {
  std::ostringstream res, timing;
  res << "eps,p,alpha,x_sup,x_sup_stderr,x_pointwise,y_pointwise,paths,failures\n";
  timing << "eps,p,alpha,wall_ms\n";
  for (const auto& r : table.rows) {
    res << format_number(r.eps) << ',' << r.p << ',' << format_number(r.alpha) << ',' << format_number(r.x_sup) << ','
        << format_number(r.x_sup_stderr) << ',' << format_number(r.x_pointwise) << ',' << format_number(r.y_pointwise)
        << ',' << r.paths << ',' << r.failures << '\n';
    timing << format_number(r.eps) << ',' << r.p << ',' << format_number(r.alpha) << ',' << format_number(r.wall_ms)
           << '\n';
  }
  write_file(dir / "results.csv", res.str());
  write_file(dir / "timing.csv", timing.str());
}

std::string render_report(const std::string& title, const ConvergenceTable& table) {
  std::ostringstream s;
  s << "# " << title << "\n\n## Strong error E sup_t ||X^eps - Xbar||^{2p}\n\n";
  s << "| eps | p | delta | error | stderr | paths | failures |\n|---|---|---|---|---|---|---|\n";
  for (const auto& r : table.rows) {
    s << "| " << format_number(r.eps) << " | " << r.p << " | " << format_number(r.delta) << " | "
      << format_number(r.error) << " | " << format_number(r.std_error) << " | " << r.paths << " | " << r.failures
      << " |\n";
  }
  s << "\n## Fitted slopes of log error vs log eps\n\n";
  for (const auto& [p, slope] : table.slopes) s << "- p=" << p << ": " << format_number(slope) << '\n';
  if (!table.bound_shape_constant.empty()) {
    s << "\n## Composite bound shape (report only)\n\n";
    for (std::size_t i = 0; i < table.bound_shape_constant.size(); ++i) {
      s << "- p=" << table.bound_shape_constant[i].first << ": K = " << format_number(table.bound_shape_constant[i].second)
        << ", rms log residual = " << format_number(table.bound_shape_residual[i].second) << '\n';
    }
  }
  s << "\n## Verdicts\n\n" << verdict_lines(table.verdicts);
  return s.str();
}

std::string render_report(const std::string& title, const KhasminskiiTable& table) {
  std::ostringstream s;
  s << "# " << title << "\n\n";
  s << "| eps | delta | rule | p | X-gap | stderr | Y-gap (sup_t) | stderr | Y-gap (mean_t) |\n"
       "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : table.rows) {
    s << "| " << format_number(r.eps) << " | " << format_number(r.delta) << " | " << (r.rule_delta ? "yes" : "")
      << " | " << r.p << " | " << format_number(r.x_gap) << " | " << format_number(r.x_gap_stderr) << " | "
      << format_number(r.y_gap) << " | " << format_number(r.y_gap_stderr) << " | " << format_number(r.y_gap_mean)
      << " |\n";
  }
  s << "\n## Verdicts\n\n" << verdict_lines(table.verdicts);
  return s.str();
}

std::string render_report(const std::string& title, const WindowTable& table) {
  std::ostringstream s;
  s << "# " << title << "\n\neps = " << format_number(table.eps) << "\n\n";
  s << "| delta/eps | value | stderr | value/(delta/eps) | samples |\n|---|---|---|---|---|\n";
  for (const auto& r : table.rows) {
    s << "| " << format_number(r.ratio) << " | " << format_number(r.value) << " | " << format_number(r.std_error)
      << " | " << format_number(r.value / r.ratio) << " | " << r.samples << " |\n";
  }
  s << "\nlog-log slope: " << format_number(table.slope) << "\n\n## Verdicts\n\n" << verdict_lines(table.verdicts);
  return s.str();
}

std::string render_report(const std::string& title, const MomentTable& table) {
  std::ostringstream s;
  s << "# " << title << "\n\n";
  s << "| eps | p | alpha | E sup ||X||_a^2p | stderr | sup E ||X||_a^2p | sup E ||Y||^2p |\n"
       "|---|---|---|---|---|---|---|\n";
  for (const auto& r : table.rows) {
    s << "| " << format_number(r.eps) << " | " << r.p << " | " << format_number(r.alpha) << " | "
      << format_number(r.x_sup) << " | " << format_number(r.x_sup_stderr) << " | " << format_number(r.x_pointwise)
      << " | " << format_number(r.y_pointwise) << " |\n";
  }
  s << "\n## Verdicts\n\n" << verdict_lines(table.verdicts);
  return s.str();
}

}  // namespace levyavg
