#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "levyavg/model.hpp"
#include "levyavg/noise_bundle.hpp"

namespace levyavg {

/// Noise actually read by a run: Brownian increments (pieces × dim) and
/// events per driving noise.
struct NoiseUsage {
  std::uint64_t w1_increments = 0;
  std::uint64_t n1_events = 0;
  std::uint64_t w2_increments = 0;
  std::uint64_t n2_events = 0;

  friend bool operator==(const NoiseUsage&, const NoiseUsage&) = default;
};

/// One trajectory on the slow timeline. x holds post-jump (càdlàg) values,
/// x_left the left limits; they differ only at slow jump epochs. y is empty
/// for reduced runs.
struct PathPair {
  int dim = 1;
  std::vector<double> t;
  std::vector<double> x;           // node * dim + k
  std::vector<double> x_left;      // node * dim + k
  std::vector<double> y;           // node * dim + k
  std::vector<double> f_integral;  // piece * dim + k: ∫ f(X_a, Y_s) ds over the piece
  std::vector<std::size_t> regular;  // indices of the k·h nodes
  double sup_norm_x = 0.0;           // max over nodes of ‖X‖
  std::uint64_t slow_fingerprint = 0;
  std::uint64_t fast_fingerprint = 0;
  NoiseUsage usage;
  std::uint64_t domain_exceeded = 0;  // off-table f̄ queries (reduced runs)

  std::size_t nodes() const noexcept { return t.size(); }
  std::span<const double> x_at(std::size_t node) const { return {x.data() + node * dim, std::size_t(dim)}; }
  std::span<const double> y_at(std::size_t node) const { return {y.data() + node * dim, std::size_t(dim)}; }
};

/// max over shared nodes of ‖X_a − X_b‖^power. Throws InvalidPairing when
/// the two paths live on different timelines.
double sup_distance(const PathPair& a, const PathPair& b, double power);

/// Jump-adapted exponential Euler for the coupled system. On a slow piece
/// [a, b] the slow argument is frozen at X_a while Y runs over the fast
/// substeps; the slow drift integral uses the exact weights of S_{b-s}
/// over each fast substep, diffusion enters as S_δ g(X_a) ΔW¹ and the
/// compensator as (1 - e^{-λδ})/λ · ∫h ν₁. Jumps use left limits.
/// Throws BlowUpError on a non-finite state.
PathPair simulate_coupled(const SlowFastModel& model, const NoiseBundle& noise);

struct FrozenPath {
  int dim = 1;
  std::vector<double> t;
  std::vector<double> y;  // node * dim + k on the fast timeline
};

/// Frozen-fast equation at natural speed with the slow argument pinned to
/// x. `noise` must be generated with ε = 1.
FrozenPath simulate_frozen(const SlowFastModel& model, std::span<const double> x, std::span<const double> y0,
                           const FastNoise& noise);

/// Streaming frozen run on [0, horizon] with regular step `step` plus the
/// N₂ epochs, drawing W² and N₂ from the given streams. on_piece(u, v, y_u)
/// is called for every piece before Y is advanced over it.
void run_frozen(const SlowFastModel& model, std::span<const double> x, std::span<const double> y0, double horizon,
                double step, RandomStream& brownian, RandomStream& jumps,
                const std::function<void(double, double, std::span<const double>)>& on_piece);

/// Process-wide count of frozen-fast runs started by simulate_frozen and
/// run_frozen.
std::uint64_t frozen_run_count();
void reset_frozen_run_count();

/// Averaged drift used by the reduced equation, componentwise.
class FbarMap {
 public:
  virtual ~FbarMap() = default;
  virtual double value(int component, double x) const = 0;
  virtual bool contains(int /*component*/, double /*x*/) const { return true; }
};

/// The same scalar map on every component, defined everywhere.
class FunctionFbar final : public FbarMap {
 public:
  explicit FunctionFbar(std::function<double(double)> fn) : fn_(std::move(fn)) {}
  double value(int, double x) const override { return fn_(x); }

 private:
  std::function<double(double)> fn_;
};

struct ReducedOptions {
  /// Throw DomainExceeded on the first off-table query instead of counting.
  bool strict_domain = false;
};

/// Averaged equation on the slow timeline with f(X, Y) replaced by f̄(X).
/// Reads W¹ and N₁ only.
PathPair simulate_reduced(const SlowFastModel& model, const FbarMap& fbar, const SlowNoise& noise,
                          ReducedOptions options = {});

struct AuxiliaryPath {
  int dim = 1;
  double delta = 0.0;
  std::size_t block_steps = 0;  // Δ / h
  std::vector<double> t;        // slow timeline
  std::vector<double> x_hat;    // node * dim + k
  std::vector<double> y_hat;    // node * dim + k, left of any restart
  std::vector<std::size_t> regular;
};

/// Khasminskii auxiliary pair on blocks of length Δ. Ŷ restarts from Y^ε at
/// every block start with the slow argument frozen at X^ε there;
/// X̂ = X^ε + ∫[f(X^ε_{⌊s/Δ⌋Δ}, Ŷ_s) − f(X^ε_s, Y^ε_s)] ds. Y^ε is
/// recomputed on the same noise and checked against `coupled`.
/// Throws InvalidBlock unless Δ is a positive multiple of h or Δ ≥ T, and
/// InvalidPairing when `coupled` does not come from `noise`.
AuxiliaryPath simulate_auxiliary(const SlowFastModel& model, double delta, const NoiseBundle& noise,
                                 const PathPair& coupled);

/// Discrete residual of the energy identity for ‖X‖^{2p}, cumulated over the
/// slow timeline (entry 0 is 0). The semigroup term is evaluated exactly as
/// ‖S_δX_a‖^{2p} − ‖X_a‖^{2p}, the Itô correction uses the realized ΔW²,
/// and jump differences are evaluated at the recorded left limits.
/// Throws InvalidPairing when path and noise do not belong together.
std::vector<double> energy_residual(const PathPair& path, const SlowFastModel& model, const NoiseBundle& noise,
                                    int p);

/// CSV with columns t, X_1..X_d, Y_1..Y_d (Y omitted for reduced paths).
void write_trajectory_csv(const std::filesystem::path& file, const PathPair& path);

}  // namespace levyavg
