#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <numbers>

namespace pmisim {

/// SplitMix64 finalizer; full-period bijective mixer on 64 bits.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

/// Counter-based random stream addressed by (seed, id...) keys.
///
/// Every consumer derives its own stream from the experiment seed plus a
/// stream tag and entity ids, so draws are reproducible regardless of
/// evaluation order and safe to recompute from scratch.
class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed) : state_(mix64(seed + kGamma)) {}

  template <class... Ids>
  KeyedRng(std::uint64_t seed, Ids... ids) : state_(mix64(seed + kGamma)) {
    (fold(static_cast<std::uint64_t>(ids)), ...);
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix64(state_);
  }

  /// Uniform double in [0,1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0,1]; safe as a log() argument.
  double next_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Standard normal via Box-Muller; pairs are cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_open();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  /// Circularly-symmetric complex normal with E|z|^2 = 1.
  std::complex<double> next_cn01() {
    const double re = next_gaussian();
    const double im = next_gaussian();
    return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
  }

  /// Unbiased uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= lim) v = next_u64();
    return v % n;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  void fold(std::uint64_t v) { state_ = mix64(state_ ^ (v + kGamma)); }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stream tags keep independent consumers off each other's sequences.
namespace stream {
inline constexpr std::uint64_t kUeDrop = 1;
inline constexpr std::uint64_t kShadowing = 2;
inline constexpr std::uint64_t kLos = 3;
inline constexpr std::uint64_t kPolPhase = 4;
inline constexpr std::uint64_t kFadingInit = 5;
inline constexpr std::uint64_t kFadingStep = 6;
inline constexpr std::uint64_t kNetInit = 7;
inline constexpr std::uint64_t kPolicy = 8;
inline constexpr std::uint64_t kOracle = 9;
}  // namespace stream

/// FNV-1a accumulator used to fingerprint channel realizations.
class Fnv1a {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xffULL;
      h_ *= 0x100000001b3ULL;
    }
  }

  void add(double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    add(bits);
  }

  void add(std::complex<double> z) {
    add(z.real());
    add(z.imag());
  }

  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace pmisim
