#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace deepfilter {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for sub-stream `stream` of the realization identified by `seed`.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

enum class Stream : std::uint64_t {
  kSystemNoise = 1,
  kObservationNoise = 2,
  kRegime = 3,
  kInitialization = 4,
  kShuffle = 5,
};

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, Stream stream) {
  return Engine(stream_seed(seed, static_cast<std::uint64_t>(stream)));
}

/// Standard normal draws with a fixed, library-independent transform
/// (Box-Muller on two 53-bit uniforms).
class GaussianSource {
 public:
  explicit GaussianSource(Engine engine) : engine_(std::move(engine)) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    // u1 in (0, 1], u2 in [0, 1)
    const double u1 = 1.0 - unit();
    const double u2 = unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return radius * std::cos(kTwoPi * u2);
  }

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  Engine& engine() noexcept { return engine_; }

 private:
  Engine engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace deepfilter
