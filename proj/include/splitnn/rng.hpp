// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace splitnn {

// SplitMix64 (Steele/Lea/Vigna constants). Used for every random draw in the
// library so that runs are reproducible bit-for-bit across platforms; std::
// distributions are implementation-defined and would break that.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 24 bits of mantissa, exact in float.
  float uniform01() {
    return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
  }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; u1 shifted into (0, 1].
  double normal() {
    double u1 = (static_cast<double>(next_u64() >> 40) + 1.0) / 16777216.0;
    double u2 = static_cast<double>(next_u64() >> 40) / 16777216.0;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Gamma(alpha, 1) via Marsaglia-Tsang, boosted for alpha < 1.
  double gamma(double alpha) {
    if (alpha < 1.0) {
      double u = (static_cast<double>(next_u64() >> 40) + 1.0) / 16777216.0;
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    double d = alpha - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = (static_cast<double>(next_u64() >> 40) + 1.0) / 16777216.0;
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  // Dirichlet(alpha) over k components.
  std::vector<double> dirichlet(double alpha, std::size_t k) {
    std::vector<double> g(k);
    double sum = 0.0;
    for (auto& v : g) {
      v = gamma(alpha);
      sum += v;
    }
    for (auto& v : g) v /= sum;
    return g;
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Derives an independent stream for a named purpose from one experiment seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (0xA5A5A5A5A5A5A5A5ULL * (stream + 1)));
  return r.next_u64();
}

}  // namespace splitnn
