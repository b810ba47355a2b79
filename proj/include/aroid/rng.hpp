#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace aroid {

/// 64-bit FNV-1a over a byte string. Used for rng stream derivation and
/// content fingerprints.
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Deterministic random stream. All distributions are implemented here rather
/// than with std:: distribution objects, whose sequences are
/// implementation-defined; this keeps runs reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = bits();
    while (v >= limit) v = bits();
    return v % n;
  }

  /// Uniform integer in [lo, hi] inclusive.
  int range_int(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double sign() { return (bits() & 1u) ? 1.0 : -1.0; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Derives independent named sub-streams from one master seed so that each
/// consumer (data order, trajectory sampling, attack init, augmentation
/// randomness, parameter init) can be pinned individually in tests.
class RngPool {
 public:
  explicit RngPool(std::uint64_t seed) : seed_(seed) {}

  Rng stream(std::string_view name) const {
    return Rng(fnv1a(name, seed_ ^ 0x9e3779b97f4a7c15ull));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace aroid
