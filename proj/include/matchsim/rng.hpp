#pragma once
// Counter-based splittable RNG (splitmix64 core).  Streams derived from a
// master seed are independent, so parallel replications can each own one
// without coordination and results do not depend on thread scheduling.
#include <cstdint>

namespace matchsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  Rng() : state_(0) {}
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // independent substream: hash-mix the current seed with the stream index
  static Rng derive(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t h = splitmix64(master ^ 0x5851f42d4c957f2dULL);
    h = splitmix64(h + stream);
    return Rng(h);
  }
  Rng split(std::uint64_t stream) const { return derive(state_, stream + 1); }

  std::uint64_t next_u64() { return splitmix64(state_++); }

  // uniform in [0,1)
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return next_double() < p;
  }

  // uniform integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t limit = ~0ULL - (~0ULL % n);
    std::uint64_t v;
    do { v = next_u64(); } while (v >= limit);
    return v % n;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  std::uint64_t seed() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace matchsim
