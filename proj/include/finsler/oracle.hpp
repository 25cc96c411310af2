#pragma once

// Riemannian oracles built only from the closed-form a_ij(x) by
// finite differences; they share no code with the jet pipeline.

#include <span>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/metric.hpp"
#include "finsler/tensor.hpp"

namespace finsler::oracle {

inline constexpr double kStep = 1e-3;

namespace detail {

// Five-point first derivative of a vector-valued map along coordinate m.
template <class Fn>
std::vector<double> d5(const Fn& f, std::span<const double> x, int m, double h) {
  std::vector<double> p(x.begin(), x.end());
  auto at = [&](double s) {
    p[m] = x[m] + s * h;
    return f(std::span<const double>(p));
  };
  const auto a = at(2), b = at(1), c = at(-1), d = at(-2);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (-a[i] + 8 * b[i] - 8 * c[i] + d[i]) / (12 * h);
  return out;
}

inline std::vector<double> matrix_at(const FinslerMetric& m, std::span<const double> x) {
  auto a = m.riemannian_matrix(x);
  if (!a) throw PreconditionError("oracle: metric has no closed-form Riemannian matrix");
  return *a;
}

inline std::vector<double> inverse(std::vector<double> a, int n) {
  std::vector<double> inv(a.size(), 0.0);
  for (int i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[p * n + c])) p = r;
    for (int j = 0; j < n; ++j) {
      std::swap(a[c * n + j], a[p * n + j]);
      std::swap(inv[c * n + j], inv[p * n + j]);
    }
    const double d = a[c * n + c];
    if (d == 0.0) throw NumericalError("oracle: singular metric matrix");
    for (int j = 0; j < n; ++j) {
      a[c * n + j] /= d;
      inv[c * n + j] /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r * n + c];
      for (int j = 0; j < n; ++j) {
        a[r * n + j] -= f * a[c * n + j];
        inv[r * n + j] -= f * inv[c * n + j];
      }
    }
  }
  return inv;
}

// Christoffel symbols flattened as (i, j, k).
inline std::vector<double> christoffel_flat(const FinslerMetric& m, std::span<const double> x, double h) {
  const int n = m.dim();
  const auto a = matrix_at(m, x);
  const auto ainv = inverse(a, n);
  std::vector<std::vector<double>> da(n);
  for (int q = 0; q < n; ++q) da[q] = d5([&](std::span<const double> y) { return matrix_at(m, y); }, x, q, h);
  std::vector<double> G(static_cast<std::size_t>(n) * n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int l = 0; l < n; ++l)
          s += ainv[i * n + l] * (da[j][l * n + k] + da[k][j * n + l] - da[l][j * n + k]);
        G[(i * n + j) * n + k] = 0.5 * s;
      }
  return G;
}

}  // namespace detail

/// Levi-Civita symbols Gamma^i_jk of a_ij(x).
inline TensorBlock christoffel(const FinslerMetric& m, std::span<const double> x, double h = kStep) {
  const int n = m.dim();
  const auto G = detail::christoffel_flat(m, x, h);
  TensorBlock out(n, "udd");
  std::copy(G.begin(), G.end(), out.data().begin());
  return out;
}

/// Spray G^i = 1/2 Gamma^i_jk v^j v^k.
inline std::vector<double> christoffel_spray(const FinslerMetric& m, std::span<const double> x,
                                             std::span<const double> v, double h = kStep) {
  const int n = m.dim();
  const TensorBlock G = christoffel(m, x, h);
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out[i] += 0.5 * G(i, j, k) * v[j] * v[k];
  return out;
}

/// Riemann tensor, R(d_k, d_l) d_j = R^i_jkl d_i, from differentiated Christoffels.
inline TensorBlock riemann(const FinslerMetric& m, std::span<const double> x, double h = kStep) {
  const int n = m.dim();
  const auto G = detail::christoffel_flat(m, x, h);
  std::vector<std::vector<double>> dG(n);
  for (int q = 0; q < n; ++q)
    dG[q] = detail::d5([&](std::span<const double> y) { return detail::christoffel_flat(m, y, h); }, x, q, h);
  auto g = [&](int i, int j, int k) { return G[(i * n + j) * n + k]; };
  auto dg = [&](int q, int i, int j, int k) { return dG[q][(i * n + j) * n + k]; };
  TensorBlock R(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = dg(k, i, l, j) - dg(l, i, k, j);
          for (int r = 0; r < n; ++r) s += g(i, k, r) * g(r, l, j) - g(i, l, r) * g(r, k, j);
          R(i, j, k, l) = s;
        }
  return R;
}

}  // namespace finsler::oracle
