#pragma once

// Counter-based random numbers. Every draw is a pure function of a 64-bit key
// and a counter, so a matrix entry or a replica stream can be regenerated
// without replaying anything that came before it.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace emf::rng {

inline constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a child key from a parent key and a list of integer labels.
constexpr std::uint64_t derive(std::uint64_t key, std::initializer_list<std::uint64_t> labels) {
  std::uint64_t h = mix64(key + golden_gamma);
  for (std::uint64_t l : labels) h = mix64(h ^ mix64(l + golden_gamma));
  return h;
}

/// Disjoint seed domains. Streams drawn from different domains never share keys.
enum class Domain : std::uint64_t {
  matrix_entries = 1,
  gaussian_divisible = 2,
  em_increments = 3,
  eigenvalue_noise = 4,
  eigenvector_noise = 5,
  sign_policy = 6,
  replica = 7,
  haar = 8,
  auxiliary = 9,
  covariance = 10,
};

constexpr std::uint64_t domain_key(std::uint64_t seed, Domain d) {
  return derive(seed, {static_cast<std::uint64_t>(d)});
}

/// The value at position `counter` of the splitmix64 sequence keyed by `key`.
constexpr std::uint64_t at(std::uint64_t key, std::uint64_t counter) {
  return mix64(key + (counter + 1) * golden_gamma);
}

/// Uniform in (0, 1], 53 random bits.
constexpr double to_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal at a counter position (Box-Muller, cosine branch).
inline double normal_at(std::uint64_t key, std::uint64_t counter) {
  const double u1 = to_unit(at(key, 2 * counter));
  const double u2 = to_unit(at(key, 2 * counter + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential view over a keyed counter sequence.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return at(key_, counter_++); }

  double uniform() { return to_unit(next_u64()); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// +1 or -1 with equal probability.
  double sign() { return (next_u64() >> 63) ? -1.0 : 1.0; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace emf::rng
