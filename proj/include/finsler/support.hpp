#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace finsler {

/// A point z = (x, v) of the slit tangent bundle.
struct SupportElement {
  std::vector<double> x;
  std::vector<double> v;

  int dim() const { return static_cast<int>(x.size()); }
};

/// Smallest Euclidean |v| accepted as a support direction.
inline constexpr double kMinDirectionNorm = 1e-8;

inline double euclidean_norm(std::span<const double> a) {
  double s = 0.0;
  for (double e : a) s += e * e;
  return std::sqrt(s);
}

}  // namespace finsler
