#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace stitch3d {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from (seed, tag). Every randomized
/// operation draws from its own stream so runs replay exactly even when the
/// set of operations changes.
inline uint64_t derive_seed(uint64_t seed, std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  uint64_t state = seed ^ h;
  splitmix64(state);
  return splitmix64(state);
}

inline uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index) {
  uint64_t state = derive_seed(seed, tag) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64(state);
}

/// Deterministic random stream. Distribution mappings are implemented here
/// rather than with std:: distributions, whose output is
/// implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1).
  double unit() { return (next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next() % span);
  }

  double gaussian() {
    // Box-Muller; one draw discarded for simplicity.
    double u1 = unit(), u2 = unit();
    while (u1 <= 1e-300) u1 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  Eigen::Vector3d point_in_ball(double radius) {
    for (;;) {
      Eigen::Vector3d p(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
      if (p.squaredNorm() <= 1.0) return radius * p;
    }
  }

  /// Uniform random rotation (Haar on SO(3)) via quaternions.
  Eigen::Matrix3d rotation() {
    Eigen::Vector4d q(gaussian(), gaussian(), gaussian(), gaussian());
    q.normalize();
    return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
  }

  /// Uniform on O(3): a rotation, reflected with probability 1/2.
  Eigen::Matrix3d orthogonal() {
    Eigen::Matrix3d r = rotation();
    if (unit() < 0.5) r.col(2) = -r.col(2);
    return r;
  }

  template <typename It>
  void shuffle(It begin, It end) {
    const auto n = end - begin;
    for (auto i = n - 1; i > 0; --i) {
      std::swap(begin[i], begin[uniform_int(0, static_cast<int>(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace stitch3d
