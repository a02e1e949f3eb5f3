#include "levyavg/noise_bundle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "levyavg/error.hpp"
#include "levyavg/model.hpp"

namespace levyavg {
namespace {

struct Hasher {
  std::uint64_t state = 0xcbf29ce484222325ULL;

  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= 0x100000001b3ULL;
    }
  }
  template <class T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  template <class T>
  void range(const std::vector<T>& v) {
    value(v.size());
    if (!v.empty()) bytes(v.data(), v.size() * sizeof(T));
  }
  void events(const JumpEventList& list) {
    value(list.events.size());
    for (const auto& e : list.events) {
      value(e.time);
      value(e.size);
    }
  }
};

/// Merges sorted regular times with slow and fast event lists. An event that
/// lands exactly on an existing time fires at that node.
Timeline build_timeline(const std::vector<double>& regular, const JumpEventList* slow_events,
                        const JumpEventList* fast_events) {
  struct Item {
    double t;
    int kind;  // 0 regular, 1 slow event, 2 fast event
    std::int32_t index;
  };
  std::vector<Item> items;
  items.reserve(regular.size() + (slow_events ? slow_events->size() : 0) + (fast_events ? fast_events->size() : 0));
  for (std::size_t i = 0; i < regular.size(); ++i) items.push_back({regular[i], 0, static_cast<std::int32_t>(i)});
  if (slow_events) {
    for (std::size_t i = 0; i < slow_events->size(); ++i)
      items.push_back({slow_events->events[i].time, 1, static_cast<std::int32_t>(i)});
  }
  if (fast_events) {
    for (std::size_t i = 0; i < fast_events->size(); ++i)
      items.push_back({fast_events->events[i].time, 2, static_cast<std::int32_t>(i)});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.t < b.t || (a.t == b.t && a.kind < b.kind);
  });

  Timeline tl;
  tl.t.reserve(items.size());
  tl.regular.reserve(regular.size());
  for (const auto& it : items) {
    if (tl.t.empty() || it.t != tl.t.back()) {
      tl.t.push_back(it.t);
      tl.jump.push_back(-1);
      tl.fast_jump.push_back(-1);
    }
    const std::size_t pos = tl.t.size() - 1;
    if (it.kind == 0) {
      tl.regular.push_back(pos);
    } else {
      auto& slot = it.kind == 1 ? tl.jump[pos] : tl.fast_jump[pos];
      if (slot != -1) throw Error(ErrorCode::kInvalidGrid, "two events of one measure at the same time");
      slot = it.index;
    }
  }
  return tl;
}

std::vector<double> slow_regular_times(const TimeGrid& grid) {
  std::vector<double> t(grid.n_slow + 1);
  for (std::size_t k = 0; k <= grid.n_slow; ++k) t[k] = grid.slow_time(k);
  return t;
}

std::vector<double> fast_regular_times(const TimeGrid& grid) {
  std::vector<double> t(grid.n_fast() + 1);
  for (std::size_t i = 0; i <= grid.n_fast(); ++i) t[i] = grid.fast_time(i);
  return t;
}

/// Index in `fine` of every time of `coarse`; both must be exact subsets.
std::vector<std::size_t> locate(const std::vector<double>& coarse, const std::vector<double>& fine) {
  std::vector<std::size_t> pos(coarse.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    while (j < fine.size() && fine[j] < coarse[i]) ++j;
    if (j == fine.size() || fine[j] != coarse[i]) {
      throw Error(ErrorCode::kInvalidGrid, "coarse timeline node is not a node of the fine timeline");
    }
    pos[i] = j;
  }
  return pos;
}

std::vector<double> sum_increments(const std::vector<double>& fine, const std::vector<std::size_t>& pos, int dim) {
  std::vector<double> out((pos.size() - 1) * dim, 0.0);
  for (std::size_t c = 0; c + 1 < pos.size(); ++c) {
    for (std::size_t f = pos[c]; f < pos[c + 1]; ++f) {
      for (int k = 0; k < dim; ++k) out[c * dim + k] += fine[f * dim + k];
    }
  }
  return out;
}

}  // namespace

TimeGrid TimeGrid::make(double horizon, double h, double h_fast) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw Error(ErrorCode::kInvalidHorizon, "horizon must be > 0");
  if (!(h > 0.0 && h <= horizon * (1.0 + 1e-12))) throw Error(ErrorCode::kInvalidGrid, "need 0 < h <= T");
  if (!(h_fast > 0.0 && h_fast <= h * (1.0 + 1e-12))) throw Error(ErrorCode::kInvalidGrid, "need 0 < h_fast <= h");
  const double steps = horizon / h;
  const double n = std::round(steps);
  if (std::abs(steps - n) > 1e-9 * steps) throw Error(ErrorCode::kInvalidGrid, "T/h must be an integer");
  TimeGrid g;
  g.horizon = horizon;
  g.n_slow = static_cast<std::size_t>(n);
  g.fast_per_slow = static_cast<std::size_t>(std::ceil(g.h() / h_fast - 1e-9));
  return g;
}

TimeGrid TimeGrid::for_epsilon(double horizon, double h, double natural_step, double epsilon) {
  return make(horizon, h, std::min(h, epsilon * natural_step));
}

double TimeGrid::slow_time(std::size_t k) const {
  if (k >= n_slow) return horizon;
  return horizon * static_cast<double>(k) / static_cast<double>(n_slow);
}

double TimeGrid::fast_time(std::size_t idx) const {
  if (idx % fast_per_slow == 0) return slow_time(idx / fast_per_slow);
  return horizon * static_cast<double>(idx) / static_cast<double>(n_fast());
}

std::uint64_t fingerprint(const SlowNoise& slow) {
  Hasher h;
  h.value(slow.dim);
  h.range(slow.timeline.t);
  h.range(slow.w1);
  h.events(slow.n1);
  return h.state;
}

std::uint64_t fingerprint(const FastNoise& fast) {
  Hasher h;
  h.value(fast.epsilon);
  h.range(fast.timeline.t);
  h.range(fast.w2);
  h.events(fast.n2);
  return h.state;
}

std::uint64_t NoiseBundle::fingerprint() const {
  Hasher h;
  h.value(levyavg::fingerprint(slow));
  h.value(levyavg::fingerprint(fast));
  return h.state;
}

SlowNoise generate_slow_noise(const SlowFastModel& model, const TimeGrid& grid, std::uint64_t seed,
                              std::uint32_t path) {
  SlowNoise out;
  out.grid = grid;
  out.dim = model.dim();
  RandomStream jumps(seed, StreamKind::kSlowJumps, path);
  out.n1 = sample_jump_events(model.nu1, grid.horizon, 1.0, jumps);
  out.n1_draws = jumps.draws();
  out.timeline = build_timeline(slow_regular_times(grid), &out.n1, nullptr);
  RandomStream brownian(seed, StreamKind::kSlowBrownian, path);
  out.w1 = sample_brownian(out.timeline.t, out.dim, brownian);
  out.w1_draws = brownian.draws();
  return out;
}

FastNoise generate_fast_noise(const SlowFastModel& model, const SlowNoise& slow, double epsilon,
                              std::uint64_t seed, std::uint32_t path) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kInvalidConfig, "epsilon must be > 0");
  FastNoise out;
  out.epsilon = epsilon;
  RandomStream jumps(seed, StreamKind::kFastJumps, path);
  out.n2 = sample_jump_events(model.nu2, slow.grid.horizon, 1.0 / epsilon, jumps);
  out.n2_draws = jumps.draws();
  out.timeline = build_timeline(fast_regular_times(slow.grid), &slow.n1, &out.n2);
  out.slow_positions = locate(slow.timeline.t, out.timeline.t);
  RandomStream brownian(seed, StreamKind::kFastBrownian, path);
  out.w2 = sample_brownian(out.timeline.t, slow.dim, brownian);
  out.w2_draws = brownian.draws();
  return out;
}

NoiseBundle generate_noise(const SlowFastModel& model, const TimeGrid& grid, double epsilon, std::uint64_t seed,
                           std::uint32_t path) {
  NoiseBundle b;
  b.seed = seed;
  b.path = path;
  b.grid = grid;
  b.slow = generate_slow_noise(model, grid, seed, path);
  b.fast = generate_fast_noise(model, b.slow, epsilon, seed, path);
  return b;
}

NoiseBundle generate_noise(const SlowFastModel& model, const TimeGrid& grid, std::uint64_t seed,
                           std::uint32_t path) {
  return generate_noise(model, grid, model.epsilon, seed, path);
}

SlowNoise coarsen(const SlowNoise& slow, std::size_t factor) {
  if (factor == 0 || slow.grid.n_slow % factor != 0) {
    throw Error(ErrorCode::kInvalidGrid, "coarsening factor must divide the slow step count");
  }
  SlowNoise out;
  out.grid = slow.grid;
  out.grid.n_slow /= factor;
  out.dim = slow.dim;
  out.n1 = slow.n1;
  out.n1_draws = slow.n1_draws;
  out.w1_draws = slow.w1_draws;
  out.timeline = build_timeline(slow_regular_times(out.grid), &out.n1, nullptr);
  out.w1 = sum_increments(slow.w1, locate(out.timeline.t, slow.timeline.t), out.dim);
  return out;
}

NoiseBundle coarsen(const NoiseBundle& noise, std::size_t factor) {
  NoiseBundle out;
  out.seed = noise.seed;
  out.path = noise.path;
  out.slow = coarsen(noise.slow, factor);
  out.grid = out.slow.grid;
  out.fast.epsilon = noise.fast.epsilon;
  out.fast.n2 = noise.fast.n2;
  out.fast.n2_draws = noise.fast.n2_draws;
  out.fast.w2_draws = noise.fast.w2_draws;
  out.fast.timeline = build_timeline(fast_regular_times(out.grid), &out.slow.n1, &out.fast.n2);
  out.fast.slow_positions = locate(out.slow.timeline.t, out.fast.timeline.t);
  out.fast.w2 = sum_increments(noise.fast.w2, locate(out.fast.timeline.t, noise.fast.timeline.t), out.slow.dim);
  return out;
}

}  // namespace levyavg
