#pragma once

#include <cstdint>
#include <random>

namespace mdsq {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for stream `stream` of a run seeded with `seed`.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

/// One std::mt19937_64 stream. Uniforms use the top 53 bits; exponentials are
/// -log1p(-u) / rate, so a given seed reproduces bit-for-bit on one platform.
class RandomStream {
 public:
  RandomStream() = default;
  RandomStream(std::uint64_t seed, std::uint64_t stream) : engine_(stream_seed(seed, stream)) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double exponential(double rate);

 private:
  std::mt19937_64 engine_;
};

/// Stream ids: arrivals use 0, server s uses 1 + s.
inline constexpr std::uint64_t kArrivalStream = 0;
inline std::uint64_t server_stream(int server) { return 1 + static_cast<std::uint64_t>(server); }

}  // namespace mdsq
