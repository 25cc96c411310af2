#pragma once

// Curvature blocks of the Cartan connection (R, P, Q), the Berwald
// hh-curvature H, flag curvature, and the related operator
// Omega-bar = Omega - eta^k.  Index convention (see tensor.hpp):
//   R(delta_k, delta_l) d_j = R^i_jkl d_i,   P(delta_k, dot-d_l) d_j = P^i_jkl d_i.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "finsler/connection.hpp"
#include "finsler/errors.hpp"
#include "finsler/metric.hpp"
#include "finsler/tensor.hpp"

namespace finsler {

/// Curvature of the nonlinear connection: [delta_k, delta_l] = -R^r_kl dot-d_r,
/// R^r_kl = delta_k G^r_l - delta_l G^r_k.
inline TensorBlock nonlinear_curvature(const PointGeometry& pg) {
  const int n = pg.n;
  TensorBlock out(n, "udd");
  for (int r = 0; r < n; ++r)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) out(r, k, l) = pg.dh_N(r, l, k) - pg.dh_N(r, k, l);
  return out;
}

/// hh-curvature R^i_jkl = delta_k Gamma*^i_jl - delta_l Gamma*^i_jk
///   + Gamma*^i_rk Gamma*^r_jl - Gamma*^i_rl Gamma*^r_jk + C^i_jr R^r_kl.
inline TensorBlock hh_curvature_R(const PointGeometry& pg) {
  if (!pg.has(Depth::curvature)) throw PreconditionError("hh_curvature_R needs Depth::curvature");
  const int n = pg.n;
  const TensorBlock Rn = nonlinear_curvature(pg);
  TensorBlock R(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
          double s = pg.dh_gamma(i, j, l, k) - pg.dh_gamma(i, j, k, l);
          for (int r = 0; r < n; ++r)
            s += pg.gamma(i, r, k) * pg.gamma(r, j, l) - pg.gamma(i, r, l) * pg.gamma(r, j, k) +
                 pg.C(i, j, r) * Rn(r, k, l);
          R(i, j, k, l) = s;
          R(i, j, l, k) = -s;
        }
  return R;
}

/// Berwald hh-curvature H^i_jkl = delta_k G^i_jl - delta_l G^i_jk + G^i_rk G^r_jl - G^i_rl G^r_jk.
inline TensorBlock berwald_hh_curvature_H(const PointGeometry& pg) {
  if (!pg.has(Depth::full)) throw PreconditionError("berwald_hh_curvature_H needs Depth::full");
  const int n = pg.n;
  TensorBlock H(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
          double s = pg.dh_B(i, j, l, k) - pg.dh_B(i, j, k, l);
          for (int r = 0; r < n; ++r) s += pg.B(i, r, k) * pg.B(r, j, l) - pg.B(i, r, l) * pg.B(r, j, k);
          H(i, j, k, l) = s;
          H(i, j, l, k) = -s;
        }
  return H;
}

/// hv-curvature from Cartan-tensor derivatives:
///   P^i_jkl = nabla^i T_jkl - nabla_j T^i_kl + T^i_kr nabla_0 T^r_jl - T^r_kj nabla_0 T^i_rl,
/// with nabla^i = g^im nabla_m and T^i_jk = C^i_jk.
inline TensorBlock hv_curvature_P(const PointGeometry& pg) {
  if (!pg.has(Depth::curvature)) throw PreconditionError("hv_curvature_P needs Depth::curvature");
  const int n = pg.n;
  const TensorBlock nT = horizontal_derivative_T(pg);  // nabla_m T_ijk
  const TensorBlock n0T = along_v(nT, pg.z);           // nabla_0 T_ijk
  // nabla_0 T^r_jl
  TensorBlock n0Tu(n, "udd");
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) s += pg.g_inv(r, m) * n0T(m, j, l);
        n0Tu(r, j, l) = s;
      }
  TensorBlock P(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) s += pg.g_inv(i, m) * (nT(j, k, l, m) - nT(m, k, l, j));
          for (int r = 0; r < n; ++r) s += pg.C(i, k, r) * n0Tu(r, j, l) - pg.C(r, k, j) * n0Tu(i, r, l);
          P(i, j, k, l) = s;
        }
  return P;
}

/// hv-curvature evaluated directly as the commutator
///   Omega(delta_k, dot-d_l) d_j = nabla_dk nabla_dl d_j - nabla_dl nabla_dk d_j - nabla_[dk, dl] d_j,
/// using [delta_k, dot-d_l] = G^r_kl dot-d_r.
inline TensorBlock hv_curvature_commutator(const PointGeometry& pg) {
  if (!pg.has(Depth::curvature)) throw PreconditionError("hv_curvature_commutator needs Depth::curvature");
  const int n = pg.n;
  TensorBlock P(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = pg.dh_C(i, j, l, k) - pg.dv_gamma(i, j, k, l);
          for (int m = 0; m < n; ++m)
            s += pg.gamma(i, m, k) * pg.C(m, j, l) - pg.gamma(m, j, k) * pg.C(i, m, l) - pg.B(m, k, l) * pg.C(i, j, m);
          P(i, j, k, l) = s;
        }
  return P;
}

/// The hv block used by the related operator:
///   sP^i_jkl = nabla^i T_jkl + 1/2 { T^i_kr n0T^r_jl - T^r_kj n0T^i_rl + T^i_lr n0T^r_jk - T^r_lj n0T^i_rk }.
inline TensorBlock symmetric_P(const PointGeometry& pg) {
  const int n = pg.n;
  const TensorBlock nT = horizontal_derivative_T(pg);
  const TensorBlock n0T = along_v(nT, pg.z);
  TensorBlock n0Tu(n, "udd");
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) s += pg.g_inv(r, m) * n0T(m, j, l);
        n0Tu(r, j, l) = s;
      }
  TensorBlock sP(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = k; l < n; ++l) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) s += pg.g_inv(i, m) * nT(j, k, l, m);
          double t = 0.0;
          for (int r = 0; r < n; ++r)
            t += pg.C(i, k, r) * n0Tu(r, j, l) - pg.C(r, k, j) * n0Tu(i, r, l) + pg.C(i, l, r) * n0Tu(r, j, k) -
                 pg.C(r, l, j) * n0Tu(i, r, k);
          sP(i, j, k, l) = sP(i, j, l, k) = s + 0.5 * t;
        }
  return sP;
}

struct SplitP {
  TensorBlock symmetric;
  TensorBlock antisymmetric;
};

/// sP from the Cartan-tensor formula and aP = P - sP, so P = sP + aP exactly.
inline SplitP split_P(const PointGeometry& pg, const TensorBlock& P) {
  SplitP out{symmetric_P(pg), TensorBlock(pg.n, "uddd")};
  for (std::size_t a = 0; a < P.size(); ++a) out.antisymmetric.data()[a] = P.data()[a] - out.symmetric.data()[a];
  return out;
}

/// vv-curvature Q^i_jkl = T^i_rl T^r_jk - T^i_rk T^r_jl.
inline TensorBlock vv_curvature_Q(const PointGeometry& pg) {
  if (!pg.has(Depth::connection)) throw PreconditionError("vv_curvature_Q needs Depth::connection");
  const int n = pg.n;
  TensorBlock Q(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int r = 0; r < n; ++r) s += pg.C(i, r, l) * pg.C(r, j, k) - pg.C(i, r, k) * pg.C(r, j, l);
          Q(i, j, k, l) = s;
        }
  return Q;
}

/// nabla_0 Q via the Leibniz rule on nabla_0 C.
inline TensorBlock nabla_v_Q(const PointGeometry& pg) {
  const int n = pg.n;
  const TensorBlock dC = along_v(horizontal_derivative_C(pg), pg.z);
  TensorBlock out(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int r = 0; r < n; ++r)
            s += dC(i, r, l) * pg.C(r, j, k) + pg.C(i, r, l) * dC(r, j, k) - dC(i, r, k) * pg.C(r, j, l) -
                 pg.C(i, r, k) * dC(r, j, l);
          out(i, j, k, l) = s;
        }
  return out;
}

/// All curvature blocks at one support element.
struct CurvatureBundle {
  TensorBlock R;
  TensorBlock P;
  TensorBlock sP;
  TensorBlock aP;
  TensorBlock Q;
  TensorBlock H;
  TensorBlock nonlinear_curv;
};

inline CurvatureBundle curvature_bundle(const PointGeometry& pg) {
  CurvatureBundle cb;
  cb.R = hh_curvature_R(pg);
  cb.P = hv_curvature_P(pg);
  auto split = split_P(pg, cb.P);
  cb.sP = std::move(split.symmetric);
  cb.aP = std::move(split.antisymmetric);
  cb.Q = vv_curvature_Q(pg);
  if (pg.has(Depth::full)) cb.H = berwald_hh_curvature_H(pg);
  cb.nonlinear_curv = nonlinear_curvature(pg);
  return cb;
}

inline CurvatureBundle curvature_bundle(const FinslerMetric& metric, const SupportElement& z) {
  return curvature_bundle(compute_point_geometry(metric, z, Depth::full));
}

/// Contraction A(X, v) v, i.e. A^i_jkl v^j X^k v^l.
inline std::vector<double> apply_xvv(const TensorBlock& A, std::span<const double> X, std::span<const double> v) {
  const int n = A.dim();
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) out[i] += A(i, j, k, l) * v[j] * X[k] * v[l];
  return out;
}

inline double g_inner(const TensorBlock& g, std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (int i = 0; i < g.dim(); ++i)
    for (int j = 0; j < g.dim(); ++j) s += g(i, j) * a[i] * b[j];
  return s;
}

/// Flag curvature K = g(A(X,v)v, X) / (g(X,X) F^2 - g(X,v)^2) for A = R (or H).
inline double flag_curvature(const PointGeometry& pg, const TensorBlock& A, std::span<const double> X) {
  const auto& v = pg.z.v;
  const double gxx = g_inner(pg.g, X, X);
  const double gxv = g_inner(pg.g, X, v);
  const double F2 = g_inner(pg.g, v, v);
  const double den = gxx * F2 - gxv * gxv;
  if (!(den > 1e-12 * gxx * F2)) throw NumericalError("flag_curvature: X is parallel to v (degenerate flag)");
  return g_inner(pg.g, apply_xvv(A, X, v), X) / den;
}

inline double flag_curvature(const FinslerMetric& metric, const SupportElement& z, std::span<const double> X) {
  const PointGeometry pg = compute_point_geometry(metric, z, Depth::curvature);
  return flag_curvature(pg, hh_curvature_R(pg), X);
}

/// eta^k hh block: eta(delta_k, delta_l) d_j = k (g_jl delta^i_k - g_jk delta^i_l).
inline TensorBlock eta_hh(const TensorBlock& g, double k) {
  const int n = g.dim();
  TensorBlock eta(n, "uddd");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          eta(i, j, a, b) = k * ((i == a ? g(j, b) : 0.0) - (i == b ? g(j, a) : 0.0));
  return eta;
}

/// Related curvature operator Omega-bar = Omega - eta^k.
struct RelatedOperator {
  double k = 0.0;
  TensorBlock omega_bar_hh;  // R - eta^k on horizontal pairs
  TensorBlock omega_bar_hv;  // sP
};

inline RelatedOperator related_operator(const PointGeometry& pg, const TensorBlock& R, double k) {
  if (!(k >= 0.0)) throw PreconditionError("related_operator: k must be non-negative");
  RelatedOperator op{k, R, symmetric_P(pg)};
  const TensorBlock eta = eta_hh(pg.g, k);
  for (std::size_t a = 0; a < R.size(); ++a) op.omega_bar_hh.data()[a] -= eta.data()[a];
  return op;
}

inline RelatedOperator related_operator(const FinslerMetric& metric, const SupportElement& z, double k) {
  if (!(k >= 0.0)) throw PreconditionError("related_operator: k must be non-negative");
  const PointGeometry pg = compute_point_geometry(metric, z, Depth::curvature);
  return related_operator(pg, hh_curvature_R(pg), k);
}

/// max |g(W(X,Y)Z, U) + g(W(X,Y)U, Z)| over frame indices for a (1,3) block W.
inline double antisymmetry_residual(const TensorBlock& g, const TensorBlock& W) {
  const int n = g.dim();
  double r = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) s += g(i, m) * W(m, j, k, l) + g(j, m) * W(m, i, k, l);
          r = std::max(r, std::abs(s));
        }
  return r;
}

/// Cyclic sum over (X, Y, Z) = (delta_k, delta_l, d_j) of a (1,3) block.
inline double cyclic_sum_residual(const TensorBlock& W) {
  const int n = W.dim();
  double r = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) r = std::max(r, std::abs(W(i, j, k, l) + W(i, k, l, j) + W(i, l, j, k)));
  return r;
}

/// First Bianchi identity on horizontal frame triples:
///   sigma R^m_kij  vs  sigma R^r_ij C^m_kr   (torsion S = 0 so only the bracket term survives).
inline double bianchi_residual(const PointGeometry& pg, const TensorBlock& R) {
  const int n = pg.n;
  const TensorBlock Rn = nonlinear_curvature(pg);
  double res = 0.0;
  for (int m = 0; m < n; ++m)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          const double lhs = R(m, k, i, j) + R(m, i, j, k) + R(m, j, k, i);
          double rhs = 0.0;
          for (int r = 0; r < n; ++r)
            rhs += Rn(r, i, j) * pg.C(m, k, r) + Rn(r, j, k) * pg.C(m, i, r) + Rn(r, k, i) * pg.C(m, j, r);
          res = std::max(res, std::abs(lhs - rhs));
        }
  return res;
}

inline double bianchi_residual(const FinslerMetric& metric, const SupportElement& z) {
  const PointGeometry pg = compute_point_geometry(metric, z, Depth::curvature);
  return bianchi_residual(pg, hh_curvature_R(pg));
}

/// max_m |nabla_m eta^k| on the hh block (horizontal covariant derivative).
inline double eta_parallel_residual(const PointGeometry& pg, double k) {
  const int n = pg.n;
  const TensorBlock eta = eta_hh(pg.g, k);
  double res = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int m = 0; m < n; ++m) {
            double s = k * ((i == a ? pg.dh_g(j, b, m) : 0.0) - (i == b ? pg.dh_g(j, a, m) : 0.0));
            for (int p = 0; p < n; ++p)
              s += pg.gamma(i, p, m) * eta(p, j, a, b) - pg.gamma(p, j, m) * eta(i, p, a, b) -
                   pg.gamma(p, a, m) * eta(i, j, p, b) - pg.gamma(p, b, m) * eta(i, j, a, p);
            res = std::max(res, std::abs(s));
          }
  return res;
}

/// max_i |sP^i_jkl v^j| over k, l.
inline double sP_v_residual(const TensorBlock& sP, std::span<const double> v) {
  const int n = sP.dim();
  double r = 0.0;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += sP(i, j, k, l) * v[j];
        r = std::max(r, std::abs(s));
      }
  return r;
}

}  // namespace finsler
