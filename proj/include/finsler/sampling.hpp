#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "finsler/metric.hpp"
#include "finsler/support.hpp"

namespace finsler {

/// Seeded generator whose output does not depend on the standard library's
/// distribution implementations.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::vector<double> vector(int n, double half_width) {
    std::vector<double> out(n);
    for (auto& e : out) e = uniform(-half_width, half_width);
    return out;
  }

  /// Random direction with 0.1 <= |v| <= 1.
  std::vector<double> direction(int n) {
    while (true) {
      auto v = vector(n, 1.0);
      const double r = euclidean_norm(v);
      if (r >= 0.1 && r <= 1.0) return v;
    }
  }

  /// Random support element with x in the metric's sampling box and domain.
  SupportElement support(const FinslerMetric& m) {
    const double w = m.sample_half_width();
    while (true) {
      auto x = vector(m.dim(), w);
      if (m.in_domain(x)) return {x, direction(m.dim())};
    }
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace finsler
