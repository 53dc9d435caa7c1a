#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "idql/util.hpp"

namespace idql {

// Deterministic random stream. All randomness in the library flows through
// explicit Rng instances so that a (config, seed) pair fixes every bit of a
// run. Uniform and normal draws are generated from raw 64-bit outputs rather
// than <random> distributions, which keeps streams identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {
    // splitmix64 warmup so that small seeds do not produce correlated streams
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    // xorshift* on a splitmix64-initialized state
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second value is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Unbiased integer in [0, n) by rejection.
  std::size_t uniform_index(std::size_t n) {
    check(n > 0, "Rng::uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % n);
  }

  // Categorical draw from nonnegative weights (need not be normalized).
  std::size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    check(total > 0.0, "Rng::categorical: weights sum to zero");
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.size() - 1;
  }

  // Derive an independent child stream. Forking depends only on the parent
  // seed and the label, never on how much of the parent has been consumed.
  Rng fork(std::uint64_t stream_id) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ull ^ seed_;
    h ^= stream_id + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return Rng(h * 0xff51afd7ed558ccdull + stream_id);
  }

  Rng fork(std::string_view label) const { return fork(fnv1a64(label)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace idql
