#pragma once

#include <cstdint>

// Reproducible random number generation.
//
// Streams are derived with SplitMix64 from a (seed, a, b, c) key and consumed
// by xoshiro256++ engines. All experiment code assigns one stream per work
// unit (trial, signal, patch, coordinate), so results do not depend on thread
// count or scheduling. The exact construction is part of the file-format /
// reproducibility contract and is documented in the README.

namespace vstcs::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += kGolden);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform double in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Derives a stream key from a base seed and up to three substream indices.
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t x = seed;
  x ^= splitmix64(a);
  x = x * 0xD1342543DE82EF95ULL + 1;
  x ^= splitmix64(b);
  x = x * 0xDABA0B6EB09322E3ULL + 1;
  x ^= splitmix64(c);
  std::uint64_t st = x;
  return splitmix64(st);
}

inline Xoshiro256pp make_stream(std::uint64_t seed, std::uint64_t a,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
  return Xoshiro256pp(derive_key(seed, a, b, c));
}

// Standard normal via Box-Muller; one variate per call, two uniforms consumed.
double standard_normal(Xoshiro256pp& gen);

}  // namespace vstcs::rng
