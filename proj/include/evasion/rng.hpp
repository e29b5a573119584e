#ifndef EVASION_RNG_HPP_
#define EVASION_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>

namespace evasion {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seeded std::mt19937_64 stream plus a count of consumed draws. The engine's
/// output sequence is fixed by the standard, so runs reproduce across
/// platforms; uniforms are built from the top 53 bits by hand for the same
/// reason.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  /// Child stream `index` of `seed`: seeded with splitmix64(seed ^ index * golden).
  static RngStream derive(std::uint64_t seed, std::uint64_t index) {
    return RngStream(splitmix64(seed ^ (index * 0x9E3779B97F4A7C15ULL)));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Exponential(1) by inversion.
  double exponential() { return -std::log1p(-uniform()); }

 private:
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace evasion

#endif  // EVASION_RNG_HPP_
