#pragma once

// Geodesics of the spray (x'' + 2 G(x, x') = 0), parallel transport of the
// Cartan connection along them, and the leaf confinement / extendability
// checks built on top.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "finsler/connection.hpp"
#include "finsler/errors.hpp"
#include "finsler/metric.hpp"
#include "finsler/nullity.hpp"
#include "finsler/parallel.hpp"

namespace finsler {

using State = std::vector<double>;

/// Dormand-Prince 5(4) tableau.
namespace dp45 {
inline constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
inline constexpr double a[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
inline constexpr double b5[7] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0.0};
inline constexpr double b4[7] = {5179.0 / 57600, 0.0, 7571.0 / 16695, 393.0 / 640, -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
}  // namespace dp45

struct OdeOptions {
  double rel_tol = 1e-9;
  double h0 = 1e-3;
  double h_max = 0.5;
};

struct OdeStep {
  double t;
  State y;
  State f;
  double error;
};

struct OdeResult {
  std::vector<OdeStep> steps;  // steps[0] is the initial state
  std::optional<double> domain_exit;
};

/// Adaptive integration of y' = rhs(t, y) on [t0, t_end]. `rhs` returns
/// std::nullopt when y is outside the domain; repeated failures near the
/// boundary end the run with a domain-exit marker instead of an exception.
inline OdeResult integrate_ode(const std::function<std::optional<State>(double, const State&)>& rhs, double t0,
                               const State& y0, double t_end, const OdeOptions& opt) {
  OdeResult out;
  auto f0 = rhs(t0, y0);
  if (!f0) throw DomainError("initial state outside the domain");
  out.steps.push_back({t0, y0, *f0, 0.0});
  const std::size_t m = y0.size();
  double t = t0;
  State y = y0, f = *f0;
  double h = std::min({opt.h0, opt.h_max, t_end - t0});
  int domain_halvings = 0;
  std::array<State, 7> k;
  State tmp(m), y5(m), err(m);
  while (t < t_end) {
    const double h_min = 1e-13 * std::max(1.0, std::abs(t));
    h = std::min(h, t_end - t);
    if (h < h_min && h < t_end - t) {
      if (domain_halvings > 0) {
        out.domain_exit = t;
        return out;
      }
      throw NumericalError("geodesic integrator: step-size underflow");
    }
    k[0] = f;
    bool outside = false;
    for (int s = 1; s < 7 && !outside; ++s) {
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int r = 0; r < s; ++r) acc += dp45::a[s][r] * k[r][i];
        tmp[i] = y[i] + h * acc;
      }
      auto fs = rhs(t + dp45::c[s] * h, tmp);
      if (!fs) {
        outside = true;
        break;
      }
      k[s] = std::move(*fs);
    }
    if (outside) {
      h *= 0.5;
      if (++domain_halvings > 60) {
        out.domain_exit = t;
        return out;
      }
      continue;
    }
    double en = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double s5 = 0.0, s4 = 0.0;
      for (int s = 0; s < 7; ++s) {
        s5 += dp45::b5[s] * k[s][i];
        s4 += dp45::b4[s] * k[s][i];
      }
      y5[i] = y[i] + h * s5;
      err[i] = h * (s5 - s4);
      const double sc = opt.rel_tol * std::max({1.0, std::abs(y[i]), std::abs(y5[i])});
      en = std::max(en, std::abs(err[i]) / sc);
    }
    if (en <= 1.0) {
      // FSAL: the 7th stage is f(t + h, y5).
      t = (t_end - (t + h) < 1e-12 * std::max(1.0, std::abs(t_end))) ? t_end : t + h;
      y = y5;
      f = k[6];
      out.steps.push_back({t, y, f, en * opt.rel_tol});
      domain_halvings = 0;
    }
    const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    h = std::min(h * (en <= 1.0 ? fac : std::min(fac, 1.0)), opt.h_max);
  }
  return out;
}

/// Geodesic trajectory: (x, v = x') at accepted steps.
struct Trajectory {
  int n = 0;
  std::vector<double> times;
  std::vector<SupportElement> states;
  std::vector<std::vector<double>> accelerations;  // x'' = -2 G at each node
  std::vector<double> errors;                      // per-step error estimate
  std::vector<double> F;                           // F(x, v) at each node
  std::optional<double> domain_exit;

  double t_end() const { return times.back(); }

  /// Cubic Hermite interpolation of (x, v) at t within [times.front(), times.back()].
  SupportElement state_at(double t) const {
    if (t < times.front() || t > times.back()) throw PreconditionError("state_at: t outside the trajectory");
    if (times.size() == 1) return states[0];
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t i = it == times.end() ? times.size() - 2 : static_cast<std::size_t>(it - times.begin()) - 1;
    const double t0 = times[i], t1 = times[i + 1], h = t1 - t0, s = (t - t0) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s), h01 = s * s * (3 - 2 * s),
                 h11 = s * s * (s - 1);
    SupportElement z{std::vector<double>(n), std::vector<double>(n)};
    for (int q = 0; q < n; ++q) {
      const double x0 = states[i].x[q], x1 = states[i + 1].x[q], v0 = states[i].v[q], v1 = states[i + 1].v[q];
      const double a0 = accelerations[i][q], a1 = accelerations[i + 1][q];
      z.x[q] = h00 * x0 + h10 * h * v0 + h01 * x1 + h11 * h * v1;
      z.v[q] = h00 * v0 + h10 * h * a0 + h01 * v1 + h11 * h * a1;
    }
    return z;
  }
};

inline std::optional<std::vector<double>> spray_acceleration(const FinslerMetric& metric, std::span<const double> x,
                                                             std::span<const double> v) {
  if (!metric.in_domain(x) || euclidean_norm(v) < kMinDirectionNorm) return std::nullopt;
  SupportElement z{std::vector<double>(x.begin(), x.end()), std::vector<double>(v.begin(), v.end())};
  const PointGeometry pg = compute_point_geometry(metric, z, Depth::spray);
  std::vector<double> a(x.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = -2.0 * pg.spray(static_cast<int>(i));
  return a;
}

inline void check_rel_tol(double rel_tol) {
  if (!(rel_tol >= 1e-12 && rel_tol <= 1e-4)) throw PreconditionError("rel_tol must be in [1e-12, 1e-4]");
}

/// Adaptive Dormand-Prince integration of the geodesic through z0 on [0, t_end].
inline Trajectory integrate_geodesic(const FinslerMetric& metric, const SupportElement& z0, double t_end,
                                     double rel_tol = 1e-9) {
  check_rel_tol(rel_tol);
  require_in_domain(metric, z0);
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw PreconditionError("t_end must be positive and finite");
  const int n = metric.dim();
  State y0(2 * n);
  std::copy(z0.x.begin(), z0.x.end(), y0.begin());
  std::copy(z0.v.begin(), z0.v.end(), y0.begin() + n);
  auto rhs = [&](double, const State& y) -> std::optional<State> {
    std::span<const double> x(y.data(), n), v(y.data() + n, n);
    auto a = spray_acceleration(metric, x, v);
    if (!a) return std::nullopt;
    State f(2 * n);
    std::copy(v.begin(), v.end(), f.begin());
    std::copy(a->begin(), a->end(), f.begin() + n);
    return f;
  };
  OdeOptions opt;
  opt.rel_tol = rel_tol;
  const OdeResult r = integrate_ode(rhs, 0.0, y0, t_end, opt);
  Trajectory tr;
  tr.n = n;
  tr.domain_exit = r.domain_exit;
  for (const auto& s : r.steps) {
    SupportElement z{State(s.y.begin(), s.y.begin() + n), State(s.y.begin() + n, s.y.end())};
    tr.times.push_back(s.t);
    tr.F.push_back(metric.F(z));
    tr.states.push_back(std::move(z));
    tr.accelerations.emplace_back(s.f.begin() + n, s.f.end());
    tr.errors.push_back(s.error);
  }
  return tr;
}

/// max_t |F(t) - F(0)| / F(0) over the nodes.
inline double energy_drift(const Trajectory& tr) {
  double d = 0.0;
  for (double f : tr.F) d = std::max(d, std::abs(f - tr.F.front()) / tr.F.front());
  return d;
}

/// Writes the trajectory as CSV: header t,x1..xn,v1..vn,F; 17 significant
/// digits; a trailing "# domain_exit t=<value>" row when the run left the domain.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t";
  for (int i = 1; i <= tr.n; ++i) os << ",x" << i;
  for (int i = 1; i <= tr.n; ++i) os << ",v" << i;
  os << ",F\n";
  char buf[40];
  auto put = [&](double d) {
    std::snprintf(buf, sizeof buf, "%.17g", d);
    os << buf;
  };
  for (std::size_t r = 0; r < tr.times.size(); ++r) {
    put(tr.times[r]);
    for (double e : tr.states[r].x) os << ',', put(e);
    for (double e : tr.states[r].v) os << ',', put(e);
    os << ',';
    put(tr.F[r]);
    os << '\n';
  }
  if (tr.domain_exit) {
    os << "# domain_exit t=";
    put(*tr.domain_exit);
    os << '\n';
  }
}

/// Cartan parallel transport of X0 along the trajectory:
///   dX^i/dt = -Gamma*^i_jk(x, x') X^j x'^k.
/// The transport ODE is integrated jointly with the geodesic on each interval
/// between trajectory nodes, restarting (x, x') from the node values.
/// Returns X at every node.
inline std::vector<std::vector<double>> parallel_transport(const FinslerMetric& metric, const Trajectory& tr,
                                                           const std::vector<double>& X0, double rel_tol = 1e-10) {
  check_rel_tol(rel_tol);
  const int n = metric.dim();
  if (static_cast<int>(X0.size()) != n) throw PreconditionError("parallel_transport: X0 has wrong dimension");
  if (euclidean_norm(X0) == 0.0) throw PreconditionError("parallel_transport: X0 must be nonzero");
  auto rhs = [&](double, const State& y) -> std::optional<State> {
    std::span<const double> x(y.data(), n), v(y.data() + n, n);
    if (!metric.in_domain(x) || euclidean_norm(v) < kMinDirectionNorm) return std::nullopt;
    const PointGeometry pg =
        compute_point_geometry(metric, SupportElement{State(x.begin(), x.end()), State(v.begin(), v.end())},
                               Depth::connection);
    State f(3 * n, 0.0);
    for (int i = 0; i < n; ++i) {
      f[i] = v[i];
      f[n + i] = -2.0 * pg.spray(i);
      double s = 0.0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) s += pg.gamma(i, j, k) * y[2 * n + j] * v[k];
      f[2 * n + i] = -s;
    }
    return f;
  };
  std::vector<std::vector<double>> out{X0};
  std::vector<double> X = X0;
  OdeOptions opt;
  opt.rel_tol = rel_tol;
  for (std::size_t i = 0; i + 1 < tr.times.size(); ++i) {
    State y(3 * n);
    std::copy(tr.states[i].x.begin(), tr.states[i].x.end(), y.begin());
    std::copy(tr.states[i].v.begin(), tr.states[i].v.end(), y.begin() + n);
    std::copy(X.begin(), X.end(), y.begin() + 2 * n);
    const OdeResult r = integrate_ode(rhs, tr.times[i], y, tr.times[i + 1], opt);
    if (r.domain_exit) throw DomainError("parallel_transport: left the domain inside a trajectory interval");
    X.assign(r.steps.back().y.begin() + 2 * n, r.steps.back().y.end());
    out.push_back(X);
  }
  return out;
}

struct ConfinementResult {
  double max_deviation = 0.0;
  double initial_deviation = 0.0;  // of v(0) relative to N^k at z0
  bool precondition_ok = true;
  int mu_k = 0;
  std::optional<double> mu_change_t;  // first node where mu_k differs from its initial value
  std::optional<double> domain_exit;
  double energy_drift = 0.0;
  double t_reached = 0.0;
};

inline constexpr double kLeafMembershipTol = 1e-8;

namespace detail {

inline double g_norm(const TensorBlock& g, std::span<const double> a) { return std::sqrt(std::max(0.0, g_inner(g, a, a))); }

/// g-norm of the component of w orthogonal to the nullity space at z, relative to |w|_g.
inline std::pair<double, int> leaf_deviation(const FinslerMetric& metric, const SupportElement& z, double k,
                                             double rank_tol) {
  const NullityPoint np = nullity_point(metric, z, k);
  const Subspace sub = nullity_argument_space(np, rank_tol);
  if (sub.dim() == z.dim()) return {0.0, sub.dim()};
  const Eigen::MatrixXd G = to_eigen(np.pg.g);
  const Eigen::Map<const Eigen::VectorXd> w(z.v.data(), z.dim());
  const Eigen::VectorXd perp = w - sub.basis * (sub.basis.transpose() * (G * w));
  return {std::sqrt(std::max(0.0, perp.dot(G * perp)) / w.dot(G * w)), sub.dim()};
}

}  // namespace detail

/// Integrates the geodesic from z0 and measures how far x'(t) leaves N^k_(x(t), x'(t)).
/// Outside diagnostic mode v(0) must lie in N^k (within 1e-8).
inline ConfinementResult totally_geodesic_check(const FinslerMetric& metric, const SupportElement& z0, double k,
                                                double t_end, bool diagnostic = false, double rel_tol = 1e-10,
                                                double rank_tol = kDefaultRankTol, int threads = default_threads()) {
  ConfinementResult res;
  const auto [dev0, mu0] = detail::leaf_deviation(metric, z0, k, rank_tol);
  res.initial_deviation = dev0;
  res.mu_k = mu0;
  res.precondition_ok = dev0 <= kLeafMembershipTol;
  if (!res.precondition_ok && !diagnostic)
    throw PreconditionError("totally_geodesic_check: v(0) is not in the k-nullity space");
  const Trajectory tr = integrate_geodesic(metric, z0, t_end, rel_tol);
  res.domain_exit = tr.domain_exit;
  res.energy_drift = energy_drift(tr);
  res.t_reached = tr.t_end();
  const auto devs = parallel_map(
      tr.times.size(), [&](std::size_t i) { return detail::leaf_deviation(metric, tr.states[i], k, rank_tol); },
      threads);
  for (std::size_t i = 0; i < devs.size(); ++i) {
    if (devs[i].second != mu0 && !res.mu_change_t) res.mu_change_t = tr.times[i];
    res.max_deviation = std::max(res.max_deviation, devs[i].first);
  }
  return res;
}

struct ExtendabilityReport {
  bool pass = false;
  ConfinementResult confinement;
  double t_max = 0.0;
};

inline constexpr double kExtendConfinementTol = 1e-5;
inline constexpr double kEnergyDriftTol = 1e-7;

/// Long-horizon proxy for completeness of the leaf through z0.
inline ExtendabilityReport extendability_probe(const FinslerMetric& metric, const SupportElement& z0, double k,
                                               double t_max = 100.0, double rel_tol = 1e-10,
                                               double rank_tol = kDefaultRankTol, int threads = default_threads()) {
  if (!metric.declared_complete()) throw PreconditionError("metric not declared complete");
  ExtendabilityReport rep;
  rep.t_max = t_max;
  rep.confinement = totally_geodesic_check(metric, z0, k, t_max, false, rel_tol, rank_tol, threads);
  const auto& c = rep.confinement;
  rep.pass = !c.domain_exit && !c.mu_change_t && c.max_deviation < kExtendConfinementTol &&
             c.energy_drift < kEnergyDriftTol && c.t_reached >= t_max;
  return rep;
}

}  // namespace finsler
