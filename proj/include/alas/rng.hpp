#pragma once
#include <cstdint>
#include <cmath>
#include <string>

namespace alas {

// Counter-based deterministic RNG. One master seed fans out into independent
// streams; each stream is a pure function of (seed, stream id, counter), so
// draws are reproducible regardless of call interleaving elsewhere.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

class Rng {
 public:
  Rng() : base_(0), ctr_(0) {}
  Rng(uint64_t seed, uint64_t stream) : base_(mix64(mix64(seed) ^ stream)), ctr_(0) {}
  Rng(uint64_t seed, const std::string& stream) : Rng(seed, fnv1a(stream)) {}

  uint64_t next_u64() { return mix64(base_ + ++ctr_); }

  // uniform in [0,1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller; two fresh uniforms per draw keeps the stream counter-pure.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  int uniform_int(int n) { return int(next_u64() % uint64_t(n)); }

 private:
  uint64_t base_;
  uint64_t ctr_;
};

}  // namespace alas
