#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace klsd {

// Counter-based generator built on the splitmix64 output function
// (Steele, Lea & Flood 2014).  The whole pipeline down to the normal
// variates is spelled out here so that a (seed, stream) pair produces
// the same bytes on every platform and thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed)) {}

  // Independent stream for replication `index` of a seeded experiment.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    Rng r(0);
    r.state_ = mix(mix(seed) + 0x9e3779b97f4a7c15ULL * (index + 1));
    return r;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // Uniform on (0, 1]; never returns 0 so log() below is safe.
  double next_double() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller, one spare cached.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace klsd
