#pragma once

#include <cmath>
#include <cstdint>

namespace bandlab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ with a per-stream state derived from (master seed, stream id).
///
/// Streams depend only on the two seeds, never on thread scheduling, so a
/// path's draw sequence is reproducible and common-random-number comparisons
/// across parameter values reuse exactly the same noise.
class PathRng {
 public:
  PathRng(std::uint64_t master_seed, std::uint64_t stream) {
    std::uint64_t mix = master_seed;
    std::uint64_t h = splitmix64(mix) ^ (stream + 0x9e3779b97f4a7c15ULL);
    for (auto& word : state_) word = splitmix64(h);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on (0,1]; never returns 0 so log() is safe.
  double uniform01() { return (double)((next_u64() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; one spare value is cached, so a stream
  /// produces a fixed sequence independent of the caller's batching.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace bandlab
