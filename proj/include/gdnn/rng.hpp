#pragma once

#include <cstdint>
#include <random>

namespace gdnn {

/// Seeded generator with platform-independent draws.
///
/// The standard distributions are implementation-defined, so bounded integers
/// and reals are derived here directly from the 64-bit Mersenne Twister
/// output. Identical seeds give identical streams on every toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform_real() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

  /// Standard normal draw (Box-Muller, one value per call).
  double normal();

  /// Child seed for stream `index` of a root seed (splitmix64 mixing).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

 private:
  std::mt19937_64 engine_;
};

}  // namespace gdnn
