#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace mg {

// Counter-based splittable generator. A stream is (key, counter); draws mix
// the pair, so the sequence depends only on the key and how many values were
// taken, never on which thread took them. split() derives an independent
// child key, which is how per-item streams stay stable when work is
// distributed across a worker pool.
class Rng {
 public:
  Rng() : key_(0), counter_(0) {}

  static Rng seeded(std::uint64_t seed) { return Rng(mix(seed ^ 0x8f1bbcdcbfa53e0bULL), 0); }

  Rng split(std::uint64_t stream) const {
    return Rng(mix(key_ ^ mix(stream + 0x9e3779b97f4a7c15ULL)), 0);
  }

  Rng split(std::string_view name) const { return split(fnv1a(name)); }

  std::uint64_t next_u64() {
    std::uint64_t c = counter_++;
    return mix(key_ + mix(c + 0x2545f4914f6cdd1dULL));
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; consumes two uniforms per call.
  double normal() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace mg
