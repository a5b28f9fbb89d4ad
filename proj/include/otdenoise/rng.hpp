#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace otdenoise {

//! Splittable counter-based random generator.
//!
//! Each (seed, stream) pair indexes an independent deterministic stream:
//! output k is a strong 64-bit mix of key(seed, stream) and k, so streams can
//! be handed to parallel workers without coordination and results do not
//! depend on scheduling order.
class SplitRng {
public:
  explicit SplitRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(derive_key(seed, stream)) {}

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + (++counter_) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the spare deviate is cached per stream.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd normal_vec(int dim) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

  /// Deterministic sub-key, e.g. for deriving per-cell seeds.
  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    auto mix = [](std::uint64_t z) {
      z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL;
      z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL;
      return z ^ (z >> 33);
    };
    return mix(mix(seed) ^ mix(stream * 0xD6E8FEB86659FD93ULL + 1));
  }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace otdenoise
