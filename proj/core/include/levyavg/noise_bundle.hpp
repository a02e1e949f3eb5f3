#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "levyavg/levy_noise.hpp"

namespace levyavg {

struct SlowFastModel;

/// Uniform slow grid k·h, k = 0..n_slow, each slow step split into
/// `fast_per_slow` fast substeps. Jump epochs are inserted on top of these
/// regular nodes by the timelines below.
struct TimeGrid {
  double horizon = 1.0;
  std::size_t n_slow = 64;
  std::size_t fast_per_slow = 1;

  /// h is rounded so that T/h is an integer (InvalidGrid if off by more
  /// than 1e-9 relative); h_fast is rounded down so that it divides h.
  /// Throws InvalidGrid unless 0 < h_fast <= h <= T.
  static TimeGrid make(double horizon, double h, double h_fast);
  /// Fast step ε·natural_step capped at h.
  static TimeGrid for_epsilon(double horizon, double h, double natural_step, double epsilon);

  double h() const { return horizon / static_cast<double>(n_slow); }
  double h_fast() const { return h() / static_cast<double>(fast_per_slow); }
  std::size_t n_fast() const { return n_slow * fast_per_slow; }
  /// Times are computed from integer indices so the slow node k and the fast
  /// node k·fast_per_slow are bitwise equal, and halving h reproduces every
  /// coarse node exactly.
  double slow_time(std::size_t k) const;
  double fast_time(std::size_t idx) const;
};

/// Merged regular nodes and jump epochs. jump[i] / fast_jump[i] hold the
/// index of the slow / fast event that fires at t[i], or -1.
struct Timeline {
  std::vector<double> t;
  std::vector<std::int32_t> jump;
  std::vector<std::int32_t> fast_jump;
  /// Timeline indices of the regular nodes (slow nodes for a slow timeline,
  /// fast nodes for a fast timeline).
  std::vector<std::size_t> regular;

  std::size_t size() const noexcept { return t.size(); }
  std::size_t pieces() const noexcept { return t.empty() ? 0 : t.size() - 1; }
};

/// Noise of the slow equation: W¹ on the slow timeline and the N₁ events.
/// It does not depend on ε, so one SlowNoise serves every ε of a path.
struct SlowNoise {
  TimeGrid grid;
  int dim = 1;
  Timeline timeline;
  std::vector<double> w1;  // w1[piece * dim + k]
  JumpEventList n1;
  std::uint64_t w1_draws = 0;  // 64-bit words drawn from the W¹ stream
  std::uint64_t n1_draws = 0;
};

/// Noise of the fast equation at a given ε: W² on the fast timeline, which
/// contains every slow-timeline node, and N₂ events at rate ν₂/ε.
struct FastNoise {
  double epsilon = 1.0;
  Timeline timeline;
  std::vector<std::size_t> slow_positions;  // fast index of each slow-timeline node
  std::vector<double> w2;                   // w2[piece * dim + k]
  JumpEventList n2;
  std::uint64_t w2_draws = 0;
  std::uint64_t n2_draws = 0;
};

struct NoiseBundle {
  std::uint64_t seed = 0;
  std::uint32_t path = 0;
  TimeGrid grid;
  SlowNoise slow;
  FastNoise fast;

  /// Hash of every increment, event and node; paths record it so that
  /// diagnostics can reject a path paired with foreign noise.
  std::uint64_t fingerprint() const;
};

std::uint64_t fingerprint(const SlowNoise& slow);
std::uint64_t fingerprint(const FastNoise& fast);

/// W¹ from stream (seed, SlowBrownian, path), N₁ from (seed, SlowJumps, path).
SlowNoise generate_slow_noise(const SlowFastModel& model, const TimeGrid& grid, std::uint64_t seed,
                              std::uint32_t path);

/// W² from (seed, FastBrownian, path), N₂ from (seed, FastJumps, path) at
/// intensity 1/ε. The fast timeline also contains the slow timeline nodes.
FastNoise generate_fast_noise(const SlowFastModel& model, const SlowNoise& slow, double epsilon,
                              std::uint64_t seed, std::uint32_t path);

/// Both parts at model.epsilon.
NoiseBundle generate_noise(const SlowFastModel& model, const TimeGrid& grid, std::uint64_t seed,
                           std::uint32_t path);
NoiseBundle generate_noise(const SlowFastModel& model, const TimeGrid& grid, double epsilon,
                           std::uint64_t seed, std::uint32_t path);

/// Same noise on a grid with factor-times fewer slow steps (and the same
/// fast substep count); increments of merged cells are summed. Requires
/// n_slow divisible by factor.
SlowNoise coarsen(const SlowNoise& slow, std::size_t factor);
NoiseBundle coarsen(const NoiseBundle& noise, std::size_t factor);

}  // namespace levyavg
