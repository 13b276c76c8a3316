#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace vtsdf {

// Deterministic RNG used everywhere results must be reproducible per seed.
// mt19937_64 output is pinned by the standard; the distributions below are
// hand-rolled because libstdc++'s std::*_distribution are not portable.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }

  // uniform double in [0, 1)
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // uniform integer in [0, n); modulo bias is negligible for n << 2^64
  int uniform_int(int n) { return int(eng_() % uint64_t(n)); }

  // standard normal, Box-Muller (no cached spare: determinism over thrift)
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

 private:
  std::mt19937_64 eng_;
};

// splitmix64 finalizer; used to derive per-frame / per-iteration substream
// seeds so evaluation order cannot change a run's output.
inline uint64_t seed_mix(uint64_t a, uint64_t b) {
  uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

inline uint64_t hash_str(const std::string& s) {
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace vtsdf
