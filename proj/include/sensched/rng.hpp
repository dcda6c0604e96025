#pragma once

// Counter-based random numbers.
//
// Every random draw in the library is a pure function of (seed, stream,
// counter). Streams name independent consumers (one per channel, one per
// episode, one for weight init, ...), so independence between them is a
// property of the construction rather than of call order.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace sensched {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3").
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Stateless keyed generator: draw(stream, counter) -> 64 random bits.
class CounterRng {
 public:
  constexpr CounterRng() = default;
  explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t draw(std::uint64_t stream, std::uint64_t counter) const {
    const auto out = philox4x32(
        {static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
         static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
        {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    return (std::uint64_t{out[0]} << 32) | out[1];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return static_cast<double>(draw(stream, counter) >> 11) * 0x1.0p-53;
  }

  /// A generator with an independent key, for nesting (scenario -> episode -> channel).
  CounterRng fork(std::uint64_t label) const {
    return CounterRng(splitmix64(seed_ ^ splitmix64(label + 0x632BE59BD9B4E019ull)));
  }

 private:
  std::uint64_t seed_ = 0;
};

/// Sequential view of one stream. Satisfies UniformRandomBitGenerator so it
/// plugs into <random> and <algorithm>, but the helpers below are preferred
/// because their output does not depend on the standard library vendor.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream() = default;
  RandomStream(CounterRng rng, std::uint64_t stream) : rng_(rng), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return rng_.draw(stream_, counter_++); }

  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Open interval (lo, hi); used where the generating law excludes endpoints.
  double uniform_open(double lo, double hi) {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return lo + (hi - lo) * u;
  }

  /// Uniform integer in [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (one variate per pair of uniforms).
  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 == 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t counter() const { return counter_; }

 private:
  CounterRng rng_{};
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
};

/// Stream labels. Keeping them in one place prevents accidental reuse.
enum class Stream : std::uint64_t {
  kScenario = 1,
  kChannels = 2,
  kPolicy = 3,
  kExploration = 4,
  kReplay = 5,
  kWeightInit = 6,
  kProcessNoise = 7,
  kEpisode = 8,
};

inline RandomStream make_stream(CounterRng rng, Stream s, std::uint64_t sub = 0) {
  return RandomStream(rng, (static_cast<std::uint64_t>(s) << 48) ^ sub);
}

}  // namespace sensched
