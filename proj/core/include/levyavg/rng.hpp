#pragma once

#include <array>
#include <cstdint>

namespace levyavg {

/// Philox4x32-10 block function (Salmon et al., SC'11). Maps a 128-bit
/// counter and a 64-bit key to 128 pseudo-random bits.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer, used to derive child seeds from (seed, tag) pairs.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Identifies which noise source a stream feeds. Keeping these distinct
/// guarantees the four driving noises never share random bits.
enum class StreamKind : std::uint32_t {
  kSlowBrownian = 1,
  kFastBrownian = 2,
  kSlowJumps = 3,
  kFastJumps = 4,
  kFrozen = 5,
  kHypothesis = 6,
  kNoiseValidation = 7,
  kWindow = 8,
  kGeneric = 15,
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  std::uint32_t path = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

inline StreamKey make_key(std::uint64_t seed, StreamKind kind, std::uint32_t path) {
  return {seed, static_cast<std::uint32_t>(kind), path};
}

/// Counter-based random stream keyed by (master seed, stream id, path id).
///
/// The key goes into the Philox key, stream and path occupy the upper half
/// of the counter and the lower half counts blocks. Any cell can therefore
/// be regenerated in isolation, and copying a stream forks it exactly.
/// Every 64-bit draw is counted so callers can audit consumption.
class RandomStream {
 public:
  RandomStream() = default;
  explicit RandomStream(StreamKey key) : key_(key) {}
  RandomStream(std::uint64_t seed, StreamKind kind, std::uint32_t path)
      : RandomStream(make_key(seed, kind, path)) {}

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  /// Standard normal via Box-Muller; consumes two 64-bit draws per pair.
  double normal();
  double exponential(double rate);

  const StreamKey& key() const noexcept { return key_; }
  std::uint64_t draws() const noexcept { return draws_; }

 private:
  void refill();

  StreamKey key_{};
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;  // 64-bit words left in buffer_ (0, 1 or 2)
  std::uint64_t draws_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace levyavg
