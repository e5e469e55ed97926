#pragma once

#include <array>
#include <cstdint>

namespace htq {

/// Named primitive sequences. Each (seed, lane, stream) triple keys an
/// independent generator, so arrival, service and patience draws never
/// share state and replications can run in any order.
enum class StreamId : std::uint64_t {
  Arrival = 1,
  Service = 2,
  Patience = 3,
  Diffusion = 4,
  Regulator = 5,
  Auxiliary = 6,
};

/// xoshiro256** keyed through SplitMix64. Bit-reproducible across platforms
/// for the integer and uniform outputs; transcendental-based outputs depend
/// on the platform libm.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t lane = 0,
                        StreamId stream = StreamId::Auxiliary);

  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Unit-rate exponential by inversion.
  double exponential();

  /// Standard normal (Box-Muller, second variate cached).
  double normal();

 private:
  std::array<std::uint64_t, 4> state_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace htq
