#pragma once

// k-nullity spaces of the related curvature operator, computed both as the
// argument space N^k_z and as the kernel of Omega-bar, plus the theorem checks
// that consume them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "finsler/connection.hpp"
#include "finsler/curvature.hpp"
#include "finsler/errors.hpp"
#include "finsler/metric.hpp"

namespace finsler {

inline constexpr double kDefaultRankTol = 1e-8;
inline constexpr double kAmbiguousGap = 1e3;

/// Subspace of T_x M given by a basis that is orthonormal in g(z).
struct Subspace {
  Eigen::MatrixXd basis;                // n x dim, columns
  std::vector<double> singular_values;  // descending, of the defining system
  double threshold = 0.0;
  double gap_ratio = 0.0;               // +inf when one side of the cut is exactly zero
  bool ambiguous = false;

  int dim() const { return static_cast<int>(basis.cols()); }
};

inline Eigen::MatrixXd to_eigen(const TensorBlock& g) {
  const int n = g.dim();
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(i, j);
  return m;
}

/// Gram-Schmidt in the inner product G; drops columns whose residual g-norm is
/// below `drop` times their original g-norm.
inline Eigen::MatrixXd g_orthonormalize(const Eigen::MatrixXd& G, const Eigen::MatrixXd& cols, double drop = 1e-10) {
  std::vector<Eigen::VectorXd> out;
  for (int c = 0; c < cols.cols(); ++c) {
    Eigen::VectorXd w = cols.col(c);
    const double n0 = std::sqrt(std::max(0.0, w.dot(G * w)));
    if (n0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : out) w -= q.dot(G * w) * q;
    const double nw = std::sqrt(std::max(0.0, w.dot(G * w)));
    if (nw <= drop * n0) continue;
    out.push_back(w / nw);
  }
  Eigen::MatrixXd B(cols.rows(), static_cast<Eigen::Index>(out.size()));
  for (std::size_t c = 0; c < out.size(); ++c) B.col(static_cast<Eigen::Index>(c)) = out[c];
  return B;
}

namespace detail {

/// Numerical null space of an m x n system with the rank policy:
/// threshold = rank_tol * max(sigma_max, 1); gap = smallest retained / largest discarded.
inline Subspace null_space(const Eigen::MatrixXd& A, const Eigen::MatrixXd& G, double rank_tol) {
  if (!(rank_tol > 0.0)) throw PreconditionError("rank_tol must be positive");
  const int n = static_cast<int>(A.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();  // descending, length min(m, n)
  Subspace out;
  out.singular_values.assign(n, 0.0);
  for (int i = 0; i < s.size(); ++i) out.singular_values[i] = s[i];
  const double smax = out.singular_values.empty() ? 0.0 : out.singular_values.front();
  const double scale = std::max(smax, 1.0);
  out.threshold = rank_tol * scale;
  int rank = 0;
  while (rank < n && out.singular_values[rank] > out.threshold) ++rank;
  const double retained = rank > 0 ? out.singular_values[rank - 1] : scale;
  const double discarded = rank < n ? out.singular_values[rank] : out.threshold;
  out.gap_ratio = discarded == 0.0 ? std::numeric_limits<double>::infinity() : retained / discarded;
  out.ambiguous = out.gap_ratio < kAmbiguousGap;
  Eigen::MatrixXd V = svd.matrixV().rightCols(n - rank);
  out.basis = g_orthonormalize(G, V, 1e-6);
  return out;
}

}  // namespace detail

/// Stacks Omega-bar^i_c a b X^a = 0 over (i, c, b); columns index X.
inline Eigen::MatrixXd argument_system(const TensorBlock& omega_bar) {
  const int n = omega_bar.dim();
  Eigen::MatrixXd A(n * n * n, n);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < n; ++c)
      for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) A((i * n + c) * n + b, a) = omega_bar(i, c, a, b);
  return A;
}

/// Stacks Omega-bar^i_j a b Z^j = 0 over (i, a, b); columns index Z.
inline Eigen::MatrixXd kernel_system(const TensorBlock& omega_bar) {
  const int n = omega_bar.dim();
  Eigen::MatrixXd A(n * n * n, n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int j = 0; j < n; ++j) A((i * n + a) * n + b, j) = omega_bar(i, j, a, b);
  return A;
}

struct NullityPoint {
  PointGeometry pg;
  TensorBlock R;
  RelatedOperator op;
};

inline NullityPoint nullity_point(const FinslerMetric& metric, const SupportElement& z, double k) {
  if (!(k >= 0.0)) throw PreconditionError("k must be non-negative");
  PointGeometry pg = compute_point_geometry(metric, z, Depth::curvature);
  TensorBlock R = hh_curvature_R(pg);
  RelatedOperator op = related_operator(pg, R, k);
  return {std::move(pg), std::move(R), std::move(op)};
}

inline Subspace nullity_argument_space(const NullityPoint& np, double rank_tol = kDefaultRankTol) {
  return detail::null_space(argument_system(np.op.omega_bar_hh), to_eigen(np.pg.g), rank_tol);
}

inline Subspace nullity_kernel_space(const NullityPoint& np, double rank_tol = kDefaultRankTol) {
  return detail::null_space(kernel_system(np.op.omega_bar_hh), to_eigen(np.pg.g), rank_tol);
}

inline Subspace nullity_argument_space(const FinslerMetric& metric, const SupportElement& z, double k,
                                       double rank_tol = kDefaultRankTol) {
  return nullity_argument_space(nullity_point(metric, z, k), rank_tol);
}

inline Subspace nullity_kernel_space(const FinslerMetric& metric, const SupportElement& z, double k,
                                     double rank_tol = kDefaultRankTol) {
  return nullity_kernel_space(nullity_point(metric, z, k), rank_tol);
}

/// Largest principal angle (radians) between two subspaces, measured in the
/// inner product G. Returns pi/2 if the dimensions differ.
inline double principal_angle(const Eigen::MatrixXd& G, const Eigen::MatrixXd& B1, const Eigen::MatrixXd& B2) {
  if (B1.cols() != B2.cols()) return std::numbers::pi / 2;
  if (B1.cols() == 0) return 0.0;
  const Eigen::LLT<Eigen::MatrixXd> llt(G);
  const Eigen::MatrixXd Lt = llt.matrixU();
  const Eigen::MatrixXd Q1 = Eigen::HouseholderQR<Eigen::MatrixXd>(Lt * B1).householderQ() *
                             Eigen::MatrixXd::Identity(B1.rows(), B1.cols());
  const Eigen::MatrixXd Q2 = Eigen::HouseholderQR<Eigen::MatrixXd>(Lt * B2).householderQ() *
                             Eigen::MatrixXd::Identity(B2.rows(), B2.cols());
  const Eigen::MatrixXd resid = Q2 - Q1 * (Q1.transpose() * Q2);
  const double s = Eigen::JacobiSVD<Eigen::MatrixXd>(resid).singularValues()(0);
  return std::asin(std::min(1.0, s));
}

/// Largest deviation of a basis from g-orthonormality.
inline double orthonormality_residual(const Eigen::MatrixXd& G, const Eigen::MatrixXd& B) {
  if (B.cols() == 0) return 0.0;
  return (B.transpose() * G * B - Eigen::MatrixXd::Identity(B.cols(), B.cols())).cwiseAbs().maxCoeff();
}

struct NullityReport {
  double k = 0.0;
  SupportElement z;
  Subspace arg;
  Subspace ker;
  int mu_k = 0;
  double principal_angle = 0.0;
  bool ambiguous = false;
  bool dims_agree = true;
  bool outside_standing_hypothesis = false;  // mu_k in {0, n}
};

inline NullityReport nullity_report(const NullityPoint& np, double k, double rank_tol = kDefaultRankTol) {
  NullityReport r;
  r.k = k;
  r.z = np.pg.z;
  r.arg = nullity_argument_space(np, rank_tol);
  r.ker = nullity_kernel_space(np, rank_tol);
  r.mu_k = r.arg.dim();
  r.dims_agree = r.arg.dim() == r.ker.dim();
  r.ambiguous = r.arg.ambiguous || r.ker.ambiguous;
  r.principal_angle = principal_angle(to_eigen(np.pg.g), r.arg.basis, r.ker.basis);
  r.outside_standing_hypothesis = r.mu_k == 0 || r.mu_k == np.pg.n;
  return r;
}

inline NullityReport nullity_report(const FinslerMetric& metric, const SupportElement& z, double k,
                                    double rank_tol = kDefaultRankTol) {
  return nullity_report(nullity_point(metric, z, k), k, rank_tol);
}

struct Theorem2Result {
  int dim_arg = 0;
  int dim_ker = 0;
  double angle = 0.0;
  double gap_arg = 0.0;
  double gap_ker = 0.0;
  bool ambiguous = false;
  bool pass = false;
  std::vector<double> spectrum_arg;
  std::vector<double> spectrum_ker;
};

inline constexpr double kTheorem2AngleTol = 1e-6;

inline Theorem2Result theorem2_check(const NullityReport& rep) {
  Theorem2Result t;
  t.dim_arg = rep.arg.dim();
  t.dim_ker = rep.ker.dim();
  t.angle = rep.principal_angle;
  t.gap_arg = rep.arg.gap_ratio;
  t.gap_ker = rep.ker.gap_ratio;
  t.ambiguous = rep.ambiguous;
  t.spectrum_arg = rep.arg.singular_values;
  t.spectrum_ker = rep.ker.singular_values;
  t.pass = t.dim_arg == t.dim_ker && t.angle < kTheorem2AngleTol;
  return t;
}

inline Theorem2Result theorem2_check(const FinslerMetric& metric, const SupportElement& z, double k,
                                     double rank_tol = kDefaultRankTol) {
  return theorem2_check(nullity_report(metric, z, k, rank_tol));
}

/// Index of k-nullity at x over several directions.
struct NullityIndex {
  int mu_k = 0;
  bool consistent = true;
  bool ambiguous = false;
  std::vector<int> per_v;
  double max_angle = 0.0;  // Euclidean principal angle between per-v subspaces
};

inline NullityIndex nullity_index(const FinslerMetric& metric, const std::vector<double>& x, double k,
                                  const std::vector<std::vector<double>>& v_samples,
                                  double rank_tol = kDefaultRankTol) {
  if (v_samples.empty()) throw PreconditionError("nullity_index: v_samples must be nonempty");
  NullityIndex out;
  const int n = static_cast<int>(x.size());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd first;
  for (std::size_t s = 0; s < v_samples.size(); ++s) {
    const Subspace sub = nullity_argument_space(metric, SupportElement{x, v_samples[s]}, k, rank_tol);
    out.per_v.push_back(sub.dim());
    out.ambiguous = out.ambiguous || sub.ambiguous;
    if (s == 0) {
      first = sub.basis;
      continue;
    }
    if (sub.dim() != first.cols()) {
      out.consistent = false;
      continue;
    }
    out.max_angle = std::max(out.max_angle, principal_angle(I, first, sub.basis));
  }
  if (out.max_angle >= kTheorem2AngleTol) out.consistent = false;
  out.mu_k = out.per_v.front();
  return out;
}

/// Two-dimensional sample grid over coordinates (0, 1), centred at `center`.
struct Grid {
  int nx = 5;
  int ny = 5;
  double spacing = 0.1;

  std::vector<std::vector<double>> points(const std::vector<double>& center) const {
    std::vector<std::vector<double>> out;
    for (int a = 0; a < nx; ++a)
      for (int b = 0; b < ny; ++b) {
        std::vector<double> p = center;
        p[0] += (a - 0.5 * (nx - 1)) * spacing;
        p[1] += (b - 0.5 * (ny - 1)) * spacing;
        out.push_back(std::move(p));
      }
    return out;
  }
};

struct InvolutivityResult {
  double max_residual = 0.0;
  int mu_k = 0;
  std::size_t grid_points = 0;
  std::size_t pairs = 0;
};

inline constexpr double kBracketFloor = 1e-8;

namespace detail {

/// g-orthogonal projector onto the nullity space at z (matrix acting on column vectors).
inline Eigen::MatrixXd nullity_projector(const Subspace& s, const Eigen::MatrixXd& G) {
  return s.basis * s.basis.transpose() * G;
}

}  // namespace detail

/// Involutivity of the nullity distribution x -> N^k_(x, v_ref) over a grid.
/// Frame fields are projections of constant reference vectors, g-orthonormalized;
/// brackets use central differences with step fd_step.
inline InvolutivityResult involutivity_check(const FinslerMetric& metric, const std::vector<double>& center,
                                             const Grid& grid, double k, double fd_step,
                                             std::optional<std::vector<double>> v_ref = std::nullopt,
                                             double rank_tol = kDefaultRankTol) {
  if (!(fd_step > 0.0)) throw PreconditionError("involutivity_check: fd_step must be positive");
  const int n = metric.dim();
  if (static_cast<int>(center.size()) != n) throw DomainError("involutivity_check: center has wrong dimension");
  const std::vector<double> v = v_ref.value_or(std::vector<double>(n, 1.0));

  struct Local {
    Eigen::MatrixXd G;
    Subspace sub;
  };
  auto local = [&](const std::vector<double>& x) {
    const NullityPoint np = nullity_point(metric, SupportElement{x, v}, k);
    Local l{to_eigen(np.pg.g), nullity_argument_space(np, rank_tol)};
    return l;
  };

  InvolutivityResult res;
  const Local c0 = local(center);
  res.mu_k = c0.sub.dim();
  if (c0.sub.ambiguous) throw NumericalError("involutivity_check: ambiguous rank at grid center");

  // Reference vectors: greedy choice of coordinate directions with the largest
  // independent projections onto the distribution at the center.
  std::vector<int> refs;
  {
    const Eigen::MatrixXd Pc = detail::nullity_projector(c0.sub, c0.G);
    Eigen::MatrixXd chosen(n, 0);
    for (int a = 0; a < res.mu_k; ++a) {
      int best = -1;
      double best_norm = 0.0;
      for (int e = 0; e < n; ++e) {
        if (std::find(refs.begin(), refs.end(), e) != refs.end()) continue;
        Eigen::VectorXd w = Pc.col(e);
        for (int c = 0; c < chosen.cols(); ++c) w -= chosen.col(c).dot(c0.G * w) * chosen.col(c);
        const double nw = std::sqrt(std::max(0.0, w.dot(c0.G * w)));
        if (nw > best_norm) {
          best_norm = nw;
          best = e;
        }
      }
      if (best < 0 || best_norm < 1e-6) throw NumericalError("involutivity_check: frame degeneracy");
      refs.push_back(best);
      Eigen::VectorXd w = Pc.col(best);
      for (int c = 0; c < chosen.cols(); ++c) w -= chosen.col(c).dot(c0.G * w) * chosen.col(c);
      chosen.conservativeResize(n, chosen.cols() + 1);
      chosen.col(chosen.cols() - 1) = w / std::sqrt(w.dot(c0.G * w));
    }
  }

  auto frame = [&](const std::vector<double>& x, Local* out_local) {
    Local l = local(x);
    if (l.sub.dim() != res.mu_k) throw PreconditionError("involutivity_check: mu_k is not constant on the region");
    const Eigen::MatrixXd P = detail::nullity_projector(l.sub, l.G);
    Eigen::MatrixXd raw(n, res.mu_k);
    for (int a = 0; a < res.mu_k; ++a) raw.col(a) = P.col(refs[a]);
    Eigen::MatrixXd F = g_orthonormalize(l.G, raw, 1e-6);
    if (F.cols() != res.mu_k) throw NumericalError("involutivity_check: frame degeneracy");
    if (out_local) *out_local = std::move(l);
    return F;
  };

  const auto pts = grid.points(center);
  res.grid_points = pts.size();
  if (res.mu_k < 2) return res;  // rank-1 distributions are involutive
  for (const auto& x : pts) {
    Local l;
    const Eigen::MatrixXd F0 = frame(x, &l);
    // dF[m] = d/dx^m of the frame matrix.
    std::vector<Eigen::MatrixXd> dF(n);
    for (int m = 0; m < n; ++m) {
      std::vector<double> xp = x, xm = x;
      xp[m] += fd_step;
      xm[m] -= fd_step;
      dF[m] = (frame(xp, nullptr) - frame(xm, nullptr)) / (2.0 * fd_step);
    }
    const Eigen::MatrixXd Pperp = Eigen::MatrixXd::Identity(n, n) - detail::nullity_projector(l.sub, l.G);
    for (int a = 0; a < res.mu_k; ++a)
      for (int b = a + 1; b < res.mu_k; ++b) {
        Eigen::VectorXd br = Eigen::VectorXd::Zero(n);
        for (int m = 0; m < n; ++m) br += F0(m, a) * dF[m].col(b) - F0(m, b) * dF[m].col(a);
        ++res.pairs;
        const double nb = std::sqrt(std::max(0.0, br.dot(l.G * br)));
        if (nb < kBracketFloor) continue;
        const Eigen::VectorXd perp = Pperp * br;
        res.max_residual = std::max(res.max_residual, std::sqrt(std::max(0.0, perp.dot(l.G * perp))) / nb);
      }
  }
  return res;
}

struct PSymmetryResult {
  bool p_symmetric = true;
  bool nabla_v_q_zero = true;
  bool agree = true;
  double residual_p = 0.0;
  double residual_q = 0.0;
  double scale_p = 1.0;
  double scale_q = 1.0;
};

inline PSymmetryResult p_symmetry_check(const PointGeometry& pg, const TensorBlock& P, double tol) {
  const int n = pg.n;
  PSymmetryResult r;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) r.residual_p = std::max(r.residual_p, std::abs(P(i, j, k, l) - P(i, j, l, k)));
  r.residual_q = max_abs(nabla_v_Q(pg));
  r.scale_p = tensor_scale(P);
  r.scale_q = std::max(1.0, max_abs(vv_curvature_Q(pg)));
  r.p_symmetric = r.residual_p < tol * r.scale_p;
  r.nabla_v_q_zero = r.residual_q < tol * r.scale_q;
  r.agree = r.p_symmetric == r.nabla_v_q_zero;
  return r;
}

inline PSymmetryResult p_symmetry_check(const FinslerMetric& metric, const SupportElement& z, double tol = 1e-7) {
  const PointGeometry pg = compute_point_geometry(metric, z, Depth::curvature);
  return p_symmetry_check(pg, hv_curvature_P(pg), tol);
}

struct LeafFlagResult {
  bool applicable = false;
  double K = 0.0;
  double deviation = 0.0;
  bool pass = false;
};

inline constexpr double kLeafFlagTol = 1e-5;

/// Flag curvature of the flag (v, X) inside N^k. Not applicable when mu_k < 2.
/// Both v and X are first projected onto N^k_z.
inline LeafFlagResult leaf_flag_curvature_check(const FinslerMetric& metric, const SupportElement& z, double k,
                                                std::optional<std::vector<double>> X = std::nullopt,
                                                double rank_tol = kDefaultRankTol) {
  const NullityPoint np = nullity_point(metric, z, k);
  const Subspace sub = nullity_argument_space(np, rank_tol);
  LeafFlagResult r;
  if (sub.dim() < 2) return r;
  const int n = metric.dim();
  const Eigen::MatrixXd G = to_eigen(np.pg.g);
  const Eigen::Map<const Eigen::VectorXd> v(z.v.data(), n);
  const Eigen::MatrixXd P = detail::nullity_projector(sub, G);
  if (((v - P * v).dot(G * (v - P * v))) > 1e-16 * v.dot(G * v))
    throw PreconditionError("leaf_flag_curvature_check: v is not in the nullity space");
  Eigen::VectorXd x;
  if (X) {
    x = P * Eigen::Map<const Eigen::VectorXd>(X->data(), n);
  } else {
    // Basis vector least aligned with v.
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < sub.dim(); ++c) {
      const double a = std::abs(sub.basis.col(c).dot(G * v));
      if (a < best) {
        best = a;
        x = sub.basis.col(c);
      }
    }
  }
  r.applicable = true;
  const std::vector<double> xs(x.data(), x.data() + n);
  r.K = flag_curvature(np.pg, np.R, xs);
  r.deviation = std::abs(r.K - k);
  r.pass = r.deviation < kLeafFlagTol;
  return r;
}

}  // namespace finsler
