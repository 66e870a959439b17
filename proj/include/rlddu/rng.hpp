// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace rlddu {

/// Splittable counter-style random stream (SplitMix64 core).
///
/// Streams are value types: `child(tag)` derives an independent substream
/// deterministically from (state, tag), so per-(user, subcarrier, sample)
/// streams can be rebuilt identically in any execution order. Generation is
/// implementation-independent (no std distributions), which keeps repeated
/// runs byte-reproducible.
class Rng {
 public:
  Rng() : state_(mix(0x9E3779B97F4A7C15ull)) {}
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0xA0761D6478BD642Full)) {}

  /// Derive an independent substream keyed by `tag`.
  [[nodiscard]] Rng child(std::uint64_t tag) const {
    Rng r;
    r.state_ = mix(state_ ^ mix(tag + 0x8BB84B93962EACC9ull));
    return r;
  }
  [[nodiscard]] Rng child(std::uint64_t a, std::uint64_t b) const {
    return child(a).child(b);
  }
  [[nodiscard]] Rng child(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return child(a).child(b).child(c);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Modulo bias is negligible for n << 2^64 (all uses here are small n).
    return next_u64() % n;
  }

  /// Standard normal via Box-Muller; one value per call, no cached state.
  double gauss() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Circularly-symmetric unit complex Gaussian: E|z|^2 = 1.
  std::complex<double> cgauss() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-std::log(u1));
    const double th = 6.283185307179586476925286766559 * u2;
    return {r * std::cos(th), r * std::sin(th)};
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
};

}  // namespace rlddu
