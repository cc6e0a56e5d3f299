#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fqr/errors.hpp"

namespace fqr {

/// splitmix64 finalizer; used to derive independent seed streams from a base
/// seed without risking overlap between low-entropy seeds.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t x = base + 0x9E3779B97F4A7C15ull * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Deterministic random source. The engine (mt19937_64) has a sequence pinned
/// by the standard, and all transformations to uniforms/normals are done by
/// hand, so a fixed seed yields bitwise-identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform draw in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the pair's second value is cached so the
  /// stream consumes engine output in a fixed pattern.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 1 - uniform() lies in (0, 1], keeping the log finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Exp(1) draw.
  double exponential() { return -std::log1p(-uniform()); }

  /// Flat Dirichlet draw over k components (normalized Exp(1) vector).
  std::vector<double> dirichlet(int k) {
    if (k < 1) throw InvalidInput("dirichlet: need at least one component");
    std::vector<double> w(static_cast<std::size_t>(k));
    double total = 0.0;
    for (auto& wi : w) {
      wi = exponential();
      total += wi;
    }
    if (total <= 0.0) {  // all draws zero is impossible in exact arithmetic
      const double flat = 1.0 / static_cast<double>(k);
      for (auto& wi : w) wi = flat;
      return w;
    }
    for (auto& wi : w) wi /= total;
    return w;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fqr
