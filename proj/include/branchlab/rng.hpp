#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace branchlab {

// SplitMix64-based generator. std::mt19937_64 is portable but the standard
// distributions are not, so all transforms are implemented here. Every
// consumer derives its own named sub-stream from one run seed, which keeps
// components independently reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [lo, hi] inclusive
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Box-Muller; one value per call so the stream layout stays simple.
  double normal(double mean, double sd) {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + sd * z;
  }

  // Rejection sampling with a bounded retry count; clamps as a fallback so
  // the stream always advances by a bounded number of draws.
  double trunc_normal(double mean, double sd, double lo, double hi) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      double x = normal(mean, sd);
      if (x >= lo && x <= hi) return x;
    }
    double x = normal(mean, sd);
    return x < lo ? lo : (x > hi ? hi : x);
  }

 private:
  uint64_t state_;
};

inline uint64_t mix_u64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derive the seed of a named sub-stream (FNV-1a over the name, mixed with
// the parent seed).
inline uint64_t derive_seed(uint64_t seed, std::string_view name) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char ch : name) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  return mix_u64(seed ^ mix_u64(h));
}

inline uint64_t derive_seed(uint64_t seed, std::string_view name, uint64_t index) {
  return mix_u64(derive_seed(seed, name) ^ mix_u64(index + 0x9e3779b97f4a7c15ull));
}

}  // namespace branchlab
