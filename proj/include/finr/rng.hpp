#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace finr {

/// splitmix64; used only to derive stream seeds and to expand a 64-bit
/// seed into xoshiro state.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

/// xoshiro256++ with hand-rolled uniform/gaussian conversions so that
/// every draw is reproducible independent of the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& si : s_) si = sm.next();
    have_spare_ = false;
  }

  /// Derives an independent stream from a master seed and a path of ids.
  /// Each path element is mixed through splitmix64, so streams for
  /// different (cell, trial) tuples are decorrelated regardless of the
  /// order in which they are instantiated.
  static Rng stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t seed = SplitMix64(master).next();
    for (std::uint64_t p : path) seed = SplitMix64(seed ^ (p + 0x9e3779b97f4a7c15ULL)).next();
    return Rng(seed);
  }

  std::uint64_t next_u64() {
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

  /// Uniform in [0,1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (pair cached).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi_u2 = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(two_pi_u2);
    have_spare_ = true;
    return r * std::cos(two_pi_u2);
  }

  /// Uniform draw from the unit sphere S^{dim-1} (normalized gaussian).
  void sphere(std::span<double> out) {
    double nrm2 = 0.0;
    do {
      nrm2 = 0.0;
      for (auto& x : out) {
        x = gaussian();
        nrm2 += x * x;
      }
    } while (nrm2 == 0.0);
    const double inv = 1.0 / std::sqrt(nrm2);
    for (auto& x : out) x *= inv;
  }

  std::vector<double> sphere(int dim) {
    std::vector<double> w(static_cast<std::size_t>(dim));
    sphere(std::span<double>(w));
    return w;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4]{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace finr
