#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace wordcover {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic random stream.
///
/// Reproducibility contract: a 64-bit master seed plus a stream index
/// derives a stream via splitmix64 mixing; the mt19937_64 core and the
/// Box-Muller transform below are fully specified, so identical
/// (seed, index) pairs produce identical sequences on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(mix(seed)) {}

  static RngStream derive(std::uint64_t master_seed, std::uint64_t stream_index) {
    std::uint64_t s = master_seed;
    detail::splitmix64(s);
    s ^= 0xd1b54a32d192ed03ULL * (stream_index + 1);
    detail::splitmix64(s);
    return RngStream(s);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  static std::uint64_t mix(std::uint64_t seed) {
    detail::splitmix64(seed);
    return detail::splitmix64(seed);
  }

  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace wordcover
