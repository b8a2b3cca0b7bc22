#pragma once

#include <cstdint>

#include "demoforge/geom.hpp"

namespace demoforge::rnd {

// SplitMix64 finalizer (Steele, Lea & Flood 2014). Bijective on 64-bit
// words, so seed derivation below is collision-free by construction.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives the per-demo seed from the batch master seed. Injective over
/// demo_index for a fixed master (composition of bijections), pure integer
/// arithmetic so the value is identical on every platform.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t demo_index) {
  return splitmix64_mix(master_seed ^ splitmix64_mix(demo_index ^ 0x8E1F0653F0E1C2A7ULL));
}

/// Counter-based SplitMix64 stream: draw k is mix(seed + k*gamma), so
/// streams can be split, skipped, and reproduced independent of worker
/// scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() { return splitmix64_mix(seed_ + kGamma * ++counter_); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform in {0, ..., n-1}. Fixed-point multiply; the O(n/2^64) bias is
  /// far below anything observable here.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  /// Uniform in the closed ball of the given radius (rejection from the
  /// cube; no transcendentals, so draws are bit-stable).
  geom::Vec3 in_ball(double radius) {
    if (radius == 0.0) return geom::Vec3::Zero();
    for (;;) {
      const geom::Vec3 v(uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0));
      if (v.squaredNorm() <= 1.0) return radius * v;
    }
  }

  /// Uniform direction on the unit sphere.
  geom::Vec3 unit_vector() {
    for (;;) {
      const geom::Vec3 v(uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0));
      const double n2 = v.squaredNorm();
      if (n2 > 1e-6 && n2 <= 1.0) return v / std::sqrt(n2);
    }
  }

  /// Rotation with uniform axis and angle uniform in [0, max_angle].
  geom::Quat rotation_in_cone(double max_angle) {
    if (max_angle == 0.0) return geom::Quat::identity();
    const geom::Vec3 axis = unit_vector();
    return geom::Quat::from_axis_angle(axis, uniform(0.0, max_angle));
  }

  /// Child stream with an independent counter space.
  Rng split(std::uint64_t stream_id) const { return Rng(derive_seed(seed_, stream_id)); }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace demoforge::rnd
