#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace nudge {

// Sequential generator owned by one user worker. Draws are derived from raw
// 64-bit output so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Textual engine state; round-trips exactly through restore().
  std::string serialize() const;
  void restore(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

// Stateless counter-based hashing: a reproducible uniform draw addressed by
// (seed, key...) so simulated traces can be evaluated at any minute in any
// order.
std::uint64_t mix64(std::uint64_t x);

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ mix64(v + 0x9e3779b97f4a7c15ULL));
}

template <typename... Keys>
std::uint64_t hash_keys(std::uint64_t seed, Keys... keys) {
  std::uint64_t h = mix64(seed);
  ((h = hash_combine(h, static_cast<std::uint64_t>(keys))), ...);
  return h;
}

template <typename... Keys>
double hashed_uniform(std::uint64_t seed, Keys... keys) {
  return static_cast<double>(hash_keys(seed, keys...) >> 11) * 0x1.0p-53;
}

// Derives an independent child seed, e.g. per user or per train step.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace nudge
