#pragma once

// Fundamental tensor, Cartan tensor, spray, nonlinear connection and the
// Berwald / Cartan connection coefficients at a support element.
//
// Everything is computed from one jet expansion of F^2 about z: each derived
// field (g, g^-1, G^i, G^i_j, Gamma*) is itself a jet, so its horizontal and
// vertical derivatives at z are read off its first-order coefficients.
// Jet variables: x^q -> q, v^q -> n + q.

#include <algorithm>
#include <cmath>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"
#include "finsler/jet_calculus.hpp"
#include "finsler/metric.hpp"
#include "finsler/support.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

/// How far up the derivative tower to go.  The value is the total jet order
/// of F^2 that the depth requires.
enum class Depth : int {
  spray = 2,       // g, G^i
  connection = 3,  // + T, C, G^i_j, Gamma*, delta g
  curvature = 4,   // + Berwald G^i_jk and first horizontal derivatives (R, P, Q)
  full = 5,        // + delta G^i_jk (Berwald curvature H)
};

/// Values at z of the connection objects, plus the horizontal derivatives
/// curvature assembly needs.  Derivative direction is always the last slot.
struct PointGeometry {
  int n = 0;
  SupportElement z;
  Depth depth = Depth::spray;
  double F2 = 0.0;

  TensorBlock g;      // "dd"
  TensorBlock g_inv;  // "uu"
  TensorBlock spray;  // "u"    G^i
  TensorBlock N;      // "ud"   G^i_j
  TensorBlock T;      // "ddd"  T_ijk
  TensorBlock C;      // "udd"  C^i_jk = g^il T_ljk
  TensorBlock gamma;  // "udd"  Gamma*^i_jk
  TensorBlock B;      // "udd"  Berwald G^i_jk

  TensorBlock dh_g;      // "ddd"   delta_m g_ij
  TensorBlock dh_T;      // "dddd"  delta_m T_ijk
  TensorBlock dh_C;      // "uddd"  delta_m C^i_jk
  TensorBlock dh_gamma;  // "uddd"  delta_m Gamma*^i_jk
  TensorBlock dv_gamma;  // "uddd"  dot-d_m Gamma*^i_jk
  TensorBlock dh_N;      // "udd"   delta_m G^i_j
  TensorBlock dh_B;      // "uddd"  delta_m G^i_jk

  bool has(Depth d) const { return static_cast<int>(depth) >= static_cast<int>(d); }
};

namespace detail {

/// Gauss-Jordan inversion of a symmetric matrix of jets (row-major), pivoting on values.
inline std::vector<Jet> invert_jets(const std::vector<Jet>& a, int n) {
  std::vector<Jet> m = a;
  std::vector<Jet> inv(static_cast<std::size_t>(n) * n);
  const JetSpace* sp = a[0].space();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) inv[i * n + j] = sp ? Jet(*sp, i == j ? 1.0 : 0.0) : Jet(i == j ? 1.0 : 0.0);
  double scale = 0.0;
  for (const auto& e : a) scale = std::max(scale, std::abs(e.value()));
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(m[r * n + c].value()) > std::abs(m[piv * n + c].value())) piv = r;
    if (std::abs(m[piv * n + c].value()) <= 1e-13 * std::max(scale, 1e-300))
      throw NumericalError("fundamental tensor is singular at this support element");
    if (piv != c)
      for (int j = 0; j < n; ++j) {
        std::swap(m[c * n + j], m[piv * n + j]);
        std::swap(inv[c * n + j], inv[piv * n + j]);
      }
    const Jet r = reciprocal(m[c * n + c]);
    for (int j = 0; j < n; ++j) {
      m[c * n + j] = m[c * n + j] * r;
      inv[c * n + j] = inv[c * n + j] * r;
    }
    for (int row = 0; row < n; ++row) {
      if (row == c) continue;
      const Jet f = m[row * n + c];
      for (int j = 0; j < n; ++j) {
        m[row * n + j] -= f * m[c * n + j];
        inv[row * n + j] -= f * inv[c * n + j];
      }
    }
  }
  // Symmetrize exactly.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Jet s = (inv[i * n + j] + inv[j * n + i]) * 0.5;
      inv[i * n + j] = s;
      inv[j * n + i] = s;
    }
  return inv;
}

/// First derivative at z along delta_m = d_m - N^r_m dot-d_r.
inline double horizontal_first(const Jet& a, int m, const TensorBlock& N, int n) {
  double s = a.first(m);
  for (int r = 0; r < n; ++r) {
    const double nr = N(r, m);
    if (nr != 0.0) s -= nr * a.first(n + r);
  }
  return s;
}

}  // namespace detail

/// Evaluates the connection objects at z up to the requested depth.
inline PointGeometry compute_point_geometry(const FinslerMetric& metric, const SupportElement& z,
                                            Depth depth = Depth::full) {
  require_in_domain(metric, z);
  const int n = metric.dim();
  const int D = static_cast<int>(depth);
  const auto& space = JetSpace::get(n, std::min(2, D), D);

  PointGeometry pg;
  pg.n = n;
  pg.z = z;
  pg.depth = depth;

  const Jet L = seed_and_evaluate(SquaredNorm{&metric}, z, space);
  pg.F2 = L.value();
  if (!(pg.F2 > 0.0) || !std::isfinite(pg.F2)) throw DomainError("F must be positive at the support element");

  auto at = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };

  // g_ij = 1/2 d^2 L / dv^i dv^j.
  std::vector<Jet> dvL(n);
  for (int i = 0; i < n; ++i) dvL[i] = L.derivative(n + i);
  std::vector<Jet> g(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      g[at(i, j)] = dvL[i].derivative(n + j) * 0.5;
      g[at(j, i)] = g[at(i, j)];
    }
  const std::vector<Jet> ginv = detail::invert_jets(g, n);

  pg.g = TensorBlock(n, "dd");
  pg.g_inv = TensorBlock(n, "uu");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      pg.g(i, j) = g[at(i, j)].value();
      pg.g_inv(i, j) = ginv[at(i, j)].value();
    }

  // G^i = 1/4 g^il (v^k d^2 L / dv^l dx^k - dL / dx^l).
  std::vector<Jet> vs(n);
  for (int q = 0; q < n; ++q) vs[q] = Jet::variable(space, n + q, z.v[q]);
  std::vector<Jet> w(n);
  for (int l = 0; l < n; ++l) {
    Jet s = -L.derivative(l);
    for (int k = 0; k < n; ++k) s += vs[k] * dvL[l].derivative(k);
    w[l] = s;
  }
  std::vector<Jet> G(n);
  pg.spray = TensorBlock(n, "u");
  for (int i = 0; i < n; ++i) {
    Jet s;
    for (int l = 0; l < n; ++l) s += ginv[at(i, l)] * w[l];
    G[i] = s * 0.25;
    pg.spray(i) = G[i].value();
  }
  if (depth == Depth::spray) return pg;

  // Nonlinear connection G^i_j = dot-d_j G^i.
  std::vector<Jet> N(static_cast<std::size_t>(n) * n);
  pg.N = TensorBlock(n, "ud");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      N[at(i, j)] = G[i].derivative(n + j);
      pg.N(i, j) = N[at(i, j)].value();
    }

  // Partial derivatives of g, the Cartan tensor and delta_m g_ij as jets.
  const std::size_t n3 = static_cast<std::size_t>(n) * n * n;
  auto at3 = [n](int i, int j, int k) { return (static_cast<std::size_t>(i) * n + j) * n + k; };
  std::vector<Jet> dxg(n3), dvg(n3), dg(n3);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int m = 0; m < n; ++m) {
        dxg[at3(i, j, m)] = g[at(i, j)].derivative(m);
        dvg[at3(i, j, m)] = g[at(i, j)].derivative(n + m);
        dxg[at3(j, i, m)] = dxg[at3(i, j, m)];
        dvg[at3(j, i, m)] = dvg[at3(i, j, m)];
      }
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int m = 0; m < n; ++m) {
        Jet s = dxg[at3(i, j, m)];
        for (int r = 0; r < n; ++r) s -= N[at(r, m)] * dvg[at3(i, j, r)];
        dg[at3(i, j, m)] = s;
        dg[at3(j, i, m)] = s;
      }

  // T_ijk = 1/2 dot-d_k g_ij is totally symmetric: fill from sorted triples.
  std::vector<Jet> T(n3);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int k = j; k < n; ++k) {
        const Jet t = dvg[at3(i, j, k)] * 0.5;
        const int p[6][3] = {{i, j, k}, {i, k, j}, {j, i, k}, {j, k, i}, {k, i, j}, {k, j, i}};
        for (const auto& q : p) T[at3(q[0], q[1], q[2])] = t;
      }

  // Cartan horizontal coefficients Gamma*^i_jk = 1/2 g^il (delta_j g_lk + delta_k g_jl - delta_l g_jk).
  std::vector<Jet> gamma(n3), C(n3);
  for (int j = 0; j < n; ++j)
    for (int k = j; k < n; ++k) {
      std::vector<Jet> low(n);
      for (int l = 0; l < n; ++l) low[l] = dg[at3(l, k, j)] + dg[at3(j, l, k)] - dg[at3(j, k, l)];
      for (int i = 0; i < n; ++i) {
        Jet s, c;
        for (int l = 0; l < n; ++l) {
          s += ginv[at(i, l)] * low[l];
          c += ginv[at(i, l)] * T[at3(l, j, k)];
        }
        gamma[at3(i, j, k)] = s * 0.5;
        gamma[at3(i, k, j)] = gamma[at3(i, j, k)];
        C[at3(i, j, k)] = c;
        C[at3(i, k, j)] = c;
      }
    }

  pg.T = TensorBlock(n, "ddd");
  pg.C = TensorBlock(n, "udd");
  pg.gamma = TensorBlock(n, "udd");
  pg.dh_g = TensorBlock(n, "ddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        pg.T(i, j, k) = T[at3(i, j, k)].value();
        pg.C(i, j, k) = C[at3(i, j, k)].value();
        pg.gamma(i, j, k) = gamma[at3(i, j, k)].value();
        pg.dh_g(i, j, k) = dg[at3(i, j, k)].value();
      }
  if (depth == Depth::connection) return pg;

  // Berwald coefficients and first derivatives.
  std::vector<Jet> B(n3);
  pg.B = TensorBlock(n, "udd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        B[at3(i, j, k)] = N[at(i, j)].derivative(n + k);
        B[at3(i, k, j)] = B[at3(i, j, k)];
        pg.B(i, j, k) = pg.B(i, k, j) = B[at3(i, j, k)].value();
      }

  pg.dh_T = TensorBlock(n, "dddd");
  pg.dh_C = TensorBlock(n, "uddd");
  pg.dh_gamma = TensorBlock(n, "uddd");
  pg.dv_gamma = TensorBlock(n, "uddd");
  pg.dh_N = TensorBlock(n, "udd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      for (int m = 0; m < n; ++m) pg.dh_N(i, j, m) = detail::horizontal_first(N[at(i, j)], m, pg.N, n);
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
          pg.dh_T(i, j, k, m) = detail::horizontal_first(T[at3(i, j, k)], m, pg.N, n);
          pg.dh_C(i, j, k, m) = detail::horizontal_first(C[at3(i, j, k)], m, pg.N, n);
          pg.dh_gamma(i, j, k, m) = detail::horizontal_first(gamma[at3(i, j, k)], m, pg.N, n);
          pg.dv_gamma(i, j, k, m) = gamma[at3(i, j, k)].first(n + m);
        }
    }
  if (depth == Depth::curvature) return pg;

  pg.dh_B = TensorBlock(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) pg.dh_B(i, j, k, m) = detail::horizontal_first(B[at3(i, j, k)], m, pg.N, n);
  return pg;
}

/// Connection objects at one support element.
struct ConnectionData {
  TensorBlock g;
  TensorBlock g_inv;
  TensorBlock T;
  TensorBlock spray;
  TensorBlock nonlinear;
  TensorBlock berwald;
  TensorBlock cartan_h;
  TensorBlock cartan_v;
};

inline ConnectionData connection_data(const FinslerMetric& metric, const SupportElement& z) {
  const PointGeometry pg = compute_point_geometry(metric, z, Depth::curvature);
  return {pg.g, pg.g_inv, pg.T, pg.spray, pg.N, pg.B, pg.gamma, pg.C};
}

/// g_ij = 1/2 d^2 F^2 / dv^i dv^j; throws if g is not positive definite.
inline TensorBlock metric_tensor(const FinslerMetric& metric, const SupportElement& z) {
  const PointGeometry pg = compute_point_geometry(metric, z, Depth::spray);
  // Cholesky-style positivity test on the leading minors.
  const int n = pg.n;
  std::vector<double> a(pg.g.data().begin(), pg.g.data().end());
  for (int c = 0; c < n; ++c) {
    double d = a[c * n + c];
    for (int p = 0; p < c; ++p) d -= a[c * n + p] * a[c * n + p];
    if (!(d > 0.0)) throw NumericalError("fundamental tensor is not positive definite at this support element");
    d = std::sqrt(d);
    a[c * n + c] = d;
    for (int r = c + 1; r < n; ++r) {
      double s = a[r * n + c];
      for (int p = 0; p < c; ++p) s -= a[r * n + p] * a[c * n + p];
      a[r * n + c] = s / d;
    }
  }
  return pg.g;
}

inline TensorBlock cartan_tensor(const FinslerMetric& metric, const SupportElement& z) {
  return compute_point_geometry(metric, z, Depth::connection).T;
}

inline TensorBlock geodesic_spray(const FinslerMetric& metric, const SupportElement& z) {
  return compute_point_geometry(metric, z, Depth::spray).spray;
}

inline TensorBlock nonlinear_connection(const FinslerMetric& metric, const SupportElement& z) {
  return compute_point_geometry(metric, z, Depth::connection).N;
}

/// Horizontal frame delta_j = d_j - G^k_j dot-d_k, stored as the vertical
/// coefficients: frame(k, j) = -G^k_j (the horizontal part of delta_j is e_j).
inline TensorBlock horizontal_frame(const FinslerMetric& metric, const SupportElement& z) {
  const TensorBlock N = nonlinear_connection(metric, z);
  TensorBlock frame(N.dim(), "ud");
  for (int k = 0; k < N.dim(); ++k)
    for (int j = 0; j < N.dim(); ++j) frame(k, j) = -N(k, j);
  return frame;
}

inline TensorBlock berwald_coefficients(const FinslerMetric& metric, const SupportElement& z) {
  return compute_point_geometry(metric, z, Depth::curvature).B;
}

struct CartanCoefficients {
  TensorBlock horizontal;  // Gamma*^i_jk
  TensorBlock vertical;    // C^i_jk
};

inline CartanCoefficients cartan_coefficients(const FinslerMetric& metric, const SupportElement& z) {
  const PointGeometry pg = compute_point_geometry(metric, z, Depth::connection);
  return {pg.gamma, pg.C};
}

/// nabla_m T_ijk (horizontal covariant derivative, direction last).
inline TensorBlock horizontal_derivative_T(const PointGeometry& pg) {
  const int n = pg.n;
  TensorBlock out(n, "dddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
          double s = pg.dh_T(i, j, k, m);
          for (int p = 0; p < n; ++p)
            s -= pg.gamma(p, i, m) * pg.T(p, j, k) + pg.gamma(p, j, m) * pg.T(i, p, k) +
                 pg.gamma(p, k, m) * pg.T(i, j, p);
          out(i, j, k, m) = s;
        }
  return out;
}

/// nabla_m C^i_jk (direction last).
inline TensorBlock horizontal_derivative_C(const PointGeometry& pg) {
  const int n = pg.n;
  TensorBlock out(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int m = 0; m < n; ++m) {
          double s = pg.dh_C(i, j, k, m);
          for (int p = 0; p < n; ++p)
            s += pg.gamma(i, p, m) * pg.C(p, j, k) - pg.gamma(p, j, m) * pg.C(i, p, k) -
                 pg.gamma(p, k, m) * pg.C(i, j, p);
          out(i, j, k, m) = s;
        }
  return out;
}

/// Contracts the last (direction) slot of a tensor with v.
inline TensorBlock along_v(const TensorBlock& t, const SupportElement& z) {
  const int n = t.dim();
  std::string var = t.variance();
  var.pop_back();
  TensorBlock out(n, var);
  const std::size_t block = out.size();
  for (std::size_t a = 0; a < block; ++a) {
    double s = 0.0;
    for (int m = 0; m < n; ++m) s += t.data()[a * n + m] * z.v[m];
    out.data()[a] = s;
  }
  return out;
}

/// Residuals of the connection invariants at one point.
struct ConnectionResiduals {
  double inverse = 0.0;             // |g g^-1 - I|
  double cartan_v_contraction = 0.0;  // |T_ijk v^k|
  double spray_euler = 0.0;         // |G^i_j v^j - 2 G^i|
  double metric_compatibility = 0.0;  // |delta_k g_ij - Gamma*^l_ik g_lj - Gamma*^l_jk g_il|
  double berwald_cartan = 0.0;      // |G^i_jk - Gamma*^i_jk - nabla_0 C^i_jk|
  double gamma_symmetry = 0.0;      // |Gamma*^i_jk - Gamma*^i_kj|
};

inline ConnectionResiduals connection_residuals(const PointGeometry& pg) {
  const int n = pg.n;
  ConnectionResiduals r;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += pg.g(i, k) * pg.g_inv(k, j);
      r.inverse = std::max(r.inverse, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  if (!pg.has(Depth::connection)) return r;
  for (int i = 0; i < n; ++i) {
    double e = -2.0 * pg.spray(i);
    for (int j = 0; j < n; ++j) {
      e += pg.N(i, j) * pg.z.v[j];
      double t = 0.0;
      for (int k = 0; k < n; ++k) t += pg.T(i, j, k) * pg.z.v[k];
      r.cartan_v_contraction = std::max(r.cartan_v_contraction, std::abs(t));
    }
    r.spray_euler = std::max(r.spray_euler, std::abs(e));
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = pg.dh_g(i, j, k);
        for (int l = 0; l < n; ++l) s -= pg.gamma(l, i, k) * pg.g(l, j) + pg.gamma(l, j, k) * pg.g(i, l);
        r.metric_compatibility = std::max(r.metric_compatibility, std::abs(s));
        r.gamma_symmetry = std::max(r.gamma_symmetry, std::abs(pg.gamma(i, j, k) - pg.gamma(i, k, j)));
      }
  if (!pg.has(Depth::curvature)) return r;
  const TensorBlock n0C = along_v(horizontal_derivative_C(pg), pg.z);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        r.berwald_cartan = std::max(r.berwald_cartan, std::abs(pg.B(i, j, k) - pg.gamma(i, j, k) - n0C(i, j, k)));
  return r;
}

}  // namespace finsler
