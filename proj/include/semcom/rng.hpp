#pragma once

#include <cstdint>
#include <initializer_list>

namespace semcom {

// SplitMix64 output mixer (constants from Steele/Lea/Vigna, "Fast
// splittable pseudorandom number generators").
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4B9B15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Derive an independent stream seed from a base seed and an id.
// Chaining calls gives hash(master, id1, id2, ...); the scheme is fixed
// so transcripts reproduce across implementations.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t id) {
  return mix64(seed ^ mix64(id + kGoldenGamma));
}

inline std::uint64_t substream(std::uint64_t seed,
                               std::initializer_list<std::uint64_t> ids) {
  for (std::uint64_t id : ids) seed = substream(seed, id);
  return seed;
}

// Counter-style SplitMix64 generator. Each logical consumer (trial,
// modality, purpose) owns its own stream, so call interleaving never
// changes the numbers a consumer sees.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  // Uniform double in [0, 1), 53 random mantissa bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; pairs are cached.
  double next_gaussian();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace semcom
