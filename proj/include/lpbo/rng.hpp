#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace lpbo {

using Seed = std::uint64_t;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed derivation: the result depends only on the base seed and
/// the ordered list of indices, never on call order or thread schedule.
inline Seed derive_seed(Seed base, std::initializer_list<std::uint64_t> indices) noexcept {
  std::uint64_t h = mix64(base);
  for (auto k : indices) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

template <typename... Ts>
Seed derive_seed(Seed base, Ts... indices) noexcept {
  return derive_seed(base, {static_cast<std::uint64_t>(indices)...});
}

/// Seeded stream with portable uniform and normal draws.
///
/// The std distributions are implementation-defined, so the conversions are
/// done here on top of mt19937_64 (whose output sequence is fixed by the
/// standard). Identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(mix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // [0, 1) with 53 random bits
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Index in [0, n).
  std::size_t index(std::size_t n) {
    auto k = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  // Box-Muller; both variates of a pair are used.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lpbo
