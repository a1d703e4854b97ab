#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace fmim {

/// Purposes used to key derived streams so that no two consumers share one.
enum class Stream : std::uint64_t {
  init = 1,
  shuffle = 2,
  mask = 3,
  augment = 4,
  select = 5,
  partition = 6,
  labels = 7,
  synth = 8,
  kmeans = 9,
  gradcheck = 10,
  semifl = 11,
};

/// Deterministic random source. Wraps mt19937_64 (whose output sequence is
/// fixed by the standard) and implements the distributions itself, so draws
/// are identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Counter-based stream derivation: the result depends only on the seed and
  /// the keys, never on how many draws other streams have made.
  static Rng derive(std::uint64_t seed, Stream purpose,
                    std::initializer_list<std::uint64_t> keys = {});

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (no cached second value).
  double normal();

  /// Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace fmim
