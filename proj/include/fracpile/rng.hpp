#pragma once

#include <cmath>
#include <cstdint>

namespace fracpile {

// Counter-based stream splitting: the state of stream (master, index) is
// four words drawn from a SplitMix64 sequence seeded with
//   master ^ (0x9E3779B97F4A7C15 * (index + 1))
// and the stream itself is xoshiro256++.  Distinct (master, index) pairs give
// statistically independent streams; the derivation is fixed so results are
// bit-reproducible across platforms and thread counts.
struct RngStream {
  std::uint64_t s[4];

  RngStream(std::uint64_t master_seed, std::uint64_t replicate_index) {
    std::uint64_t seed = master_seed ^ (0x9E3779B97F4A7C15ULL * (replicate_index + 1));
    for (int i = 0; i < 4; ++i) {
      // SplitMix64
      seed += 0x9E3779B97F4A7C15ULL;
      std::uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      s[i] = z ^ (z >> 31);
    }
  }

  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t next() {
    // xoshiro256++
    std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
    std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }

  // Uniform on (0, 1]; never returns 0 so log() below is safe.
  double uniform() { return double((next() >> 11) + 1) * 0x1.0p-53; }

  // Uniform on (-1, 1).
  double uniform_sym() { return 2.0 * uniform() - 1.0; }

  // Standard normal via Box-Muller (portable, bit-reproducible).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace fracpile
