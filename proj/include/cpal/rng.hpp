#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include <Eigen/Dense>

namespace cpal {

// Counter-based deterministic generator. Every output is a pure function of
// (seed, stream tag, counter): the counter is mixed through the SplitMix64
// finalizer, so draw k can be reproduced (or computed in parallel) without
// generating draws 0..k-1. Streams derived from the same seed with different
// tags are independent.
//
// Transforms are fixed and documented here:
//   uniform01: top 53 bits of the mixed word, scaled by 2^-53 -> [0, 1)
//   normal:    Box-Muller on two consecutive words, cosine branch only
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::string_view stream = {})
      : key_(derive_key(seed, stream)) {}

  static std::uint64_t mix(std::uint64_t key, std::uint64_t counter) {
    std::uint64_t z = key + (counter + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix(key_, counter_++); }

  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; avoids log(0) in Box-Muller.
  double uniform01_open_zero() { return 1.0 - uniform01(); }

  double normal() {
    const double u1 = uniform01_open_zero();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Indexed draw: the i-th normal of this stream, independent of any state.
  double normal_at(std::uint64_t i) const {
    const double u1 =
        1.0 - static_cast<double>(mix(key_, 2 * i) >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(mix(key_, 2 * i + 1) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  Eigen::VectorXd normal_vector(int dim) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

  // Uniform index in [0, n). The floor-of-uniform construction has bias
  // below 2^-50 for desk-scale n.
  int uniform_index(int n) {
    const int k = static_cast<int>(uniform01() * n);
    return k >= n ? n - 1 : k;
  }

  std::uint64_t key() const { return key_; }

 private:
  static std::uint64_t derive_key(std::uint64_t seed, std::string_view stream) {
    // FNV-1a over the tag, then one mixing round against the seed.
    std::uint64_t h = 1469598103934665603ULL;
    for (const char c : stream) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
    return mix(h, seed);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace cpal
