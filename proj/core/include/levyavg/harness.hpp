#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levyavg/averaging.hpp"
#include "levyavg/model.hpp"
#include "levyavg/simulate.hpp"

namespace levyavg {

/// Block length Δ(ε): ε√(−ln ε) by default, or a fixed value.
struct DeltaRule {
  enum class Kind { kKhasminskii, kFixed };
  Kind kind = Kind::kKhasminskii;
  double fixed = 0.0;

  double operator()(double eps) const;
  /// "khasminskii" or "fixed:<v>"; throws InvalidConfig otherwise.
  static DeltaRule parse(const std::string& text);
  std::string to_string() const;
};

struct StudyConfig {
  std::vector<double> eps{0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125};
  std::vector<int> p{1, 2};
  std::size_t paths = 200;
  double horizon = 1.0;
  double h = 1.0 / 64.0;
  /// Fast step in the fast equation's own time; h_fast = min(h, ε·natural_step).
  std::optional<double> natural_step;
  DeltaRule delta_rule;
  std::uint64_t seed = 7;
  unsigned threads = 1;

  // f̄ table for the reduced equation
  SampleBox fbar_box{-3.0, 3.0};
  std::size_t fbar_nodes = 25;
  FbarConfig fbar;

  // Khasminskii study: Δ multipliers of Δ(ε), plus the one-step block h
  std::vector<double> delta_multipliers{1.0, 2.0, 4.0};

  // averaging-window study
  double window_eps = 0.015625;
  std::vector<double> window_ratios{1.0, 2.0, 4.0, 8.0};
  std::size_t window_samples = 4000;

  // moment and regularity study
  std::vector<double> alphas{0.0};
  double bounded_factor = 2.0;

  std::size_t dump_paths = 0;
  /// Where dumped trajectories go; not part of the config echo.
  std::filesystem::path dump_directory;

  std::filesystem::path dump_dir() const { return dump_directory; }
  double resolved_natural_step() const { return natural_step.value_or(h); }
  TimeGrid grid_for(double eps) const;
  /// Throws InvalidConfig on ε ∉ (0,1), Δ(ε) >= T, paths < 2 or p ∉ {1,2,3}.
  void validate() const;
  nlohmann::json to_json() const;
  /// Fields missing from `j` keep the defaults above.
  static StudyConfig from_json(const nlohmann::json& j);
};

/// "2^-4..2^-9" (every dyadic exponent in between), "2^-3" or a comma list
/// of plain numbers / dyadic terms.
std::vector<double> parse_eps_list(const std::string& text);
/// "lo..hi" -> {lo, hi}.
std::pair<double, double> parse_range(const std::string& text);

/// Stable text for CSV output.
std::string format_number(double v);

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ConvergenceRow {
  double eps = 0.0;
  int p = 1;
  double delta = 0.0;
  double error = 0.0;
  double std_error = 0.0;
  std::size_t paths = 0;  // completed
  std::size_t failures = 0;
  double wall_ms = 0.0;
  std::uint64_t domain_exceeded = 0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  std::vector<std::pair<int, double>> slopes;  // (p, slope of log Ê vs log ε)
  std::vector<std::pair<int, double>> bound_shape_constant;  // report only
  std::vector<std::pair<int, double>> bound_shape_residual;
  std::uint64_t coupling_mismatches = 0;  // reduced read other W¹/N₁ than coupled
  std::vector<Verdict> verdicts;

  std::vector<ConvergenceRow> rows_for(int p) const;
};

/// Coupled vs reduced runs on common (W¹, N₁) for every (ε, path) cell;
/// the error is the MC mean of sup over slow-timeline nodes of
/// ‖X^ε − X̄‖^{2p}. Verdicts: Ê(ε/2) ≤ Ê(ε) + 2σ for consecutive ε and
/// Ê(ε_min)/Ê(ε_max) < 0.3 per p.
ConvergenceTable strong_error_study(const SlowFastModel& model, const FbarMap& fbar, const StudyConfig& cfg);

/// Verdict that the errors show no ε-trend: every pair of ε agrees within
/// 3 combined standard errors.
Verdict no_trend_verdict(const ConvergenceTable& table, int p);

struct KhasminskiiRow {
  double eps = 0.0;
  double delta = 0.0;
  std::size_t block_steps = 0;
  bool rule_delta = false;  // Δ is Δ(ε) rounded to the grid
  int p = 1;
  double x_gap = 0.0;  // E sup ‖X^ε − X̂‖^{2p}
  double x_gap_stderr = 0.0;
  double y_gap = 0.0;  // sup over nodes of E ‖Y^ε − Ŷ‖^{2p}
  double y_gap_stderr = 0.0;
  double y_gap_mean = 0.0;  // time average over nodes of E ‖Y^ε − Ŷ‖^{2p}
  std::size_t paths = 0;
  std::size_t failures = 0;
  double wall_ms = 0.0;
};

struct KhasminskiiTable {
  std::vector<KhasminskiiRow> rows;
  std::vector<Verdict> verdicts;
};

/// Gaps between (X^ε, Y^ε) and the auxiliary pair on common noise for
/// Δ ∈ {h} ∪ {m·Δ(ε)} rounded to multiples of h.
KhasminskiiTable khasminskii_study(const SlowFastModel& model, const StudyConfig& cfg);

struct WindowRow {
  double ratio = 0.0;  // Δ/ε
  double value = 0.0;  // E‖∫₀^{Δ/ε} S_{Δ−εs}[f(x, Ŷ_s) − f̄(x)] ds‖²
  double std_error = 0.0;
  std::size_t samples = 0;
};

struct WindowTable {
  double eps = 0.0;
  std::vector<WindowRow> rows;
  double slope = 0.0;  // log-log slope of value vs Δ/ε
  std::size_t failures = 0;
  std::vector<Verdict> verdicts;
};

/// Frozen starting pairs (x, y) are read at block boundaries of coupled runs
/// at cfg.window_eps; each pair starts a natural-speed frozen run with
/// independent noise.
WindowTable averaging_window_study(const SlowFastModel& model, const FbarMap& fbar, const StudyConfig& cfg);

struct MomentRow {
  double eps = 0.0;
  int p = 1;
  double alpha = 0.0;
  double x_sup = 0.0;  // E sup_t ‖X_t‖_α^{2p}
  double x_sup_stderr = 0.0;
  double x_pointwise = 0.0;  // sup_t E ‖X_t‖_α^{2p}
  double y_pointwise = 0.0;  // sup_t E ‖Y_t‖^{2p}
  std::size_t paths = 0;
  std::size_t failures = 0;
  double wall_ms = 0.0;
};

struct MomentTable {
  std::vector<MomentRow> rows;
  std::vector<Verdict> verdicts;
};

/// Moments along coupled paths over the ε grid; α = 0 is the plain norm.
/// Verdict per (quantity, p, α): max/min across ε below cfg.bounded_factor.
MomentTable moment_and_regularity_study(const SlowFastModel& model, const StudyConfig& cfg);

/// Builds the f̄ table from cfg.fbar_box / fbar_nodes / fbar.
AveragedCoefficient build_study_fbar(const SlowFastModel& model, const StudyConfig& cfg);

// Output. results.csv carries only seed-determined columns; wall times go
// to timing.csv so that reruns are byte-identical.
void write_results(const std::filesystem::path& dir, const ConvergenceTable& table);
void write_results(const std::filesystem::path& dir, const KhasminskiiTable& table);
void write_results(const std::filesystem::path& dir, const WindowTable& table);
void write_results(const std::filesystem::path& dir, const MomentTable& table);

std::string render_report(const std::string& title, const ConvergenceTable& table);
std::string render_report(const std::string& title, const KhasminskiiTable& table);
std::string render_report(const std::string& title, const WindowTable& table);
std::string render_report(const std::string& title, const MomentTable& table);

bool all_pass(const std::vector<Verdict>& verdicts);

}  // namespace levyavg
