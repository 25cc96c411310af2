#pragma once

// Exact mixed partials of scalar fields on TM_0 through jets, and the
// independent central-difference oracle used to cross-check them.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"
#include "finsler/support.hpp"

namespace finsler {

inline constexpr int kMaxOrderX = 4;
inline constexpr int kMaxOrderV = 6;
inline constexpr int kMaxOrderTotal = 8;

/// Sorted multi-index: x lists x-slots and v lists v-slots, with repetition.
/// {x = {0}, v = {1, 1}} is d^3 / dx^1 dv^2 dv^2 (0-based slots).
struct MultiIndex {
  std::vector<int> x;
  std::vector<int> v;

  MultiIndex() = default;
  MultiIndex(std::vector<int> xs, std::vector<int> vs) : x(std::move(xs)), v(std::move(vs)) {
    std::sort(x.begin(), x.end());
    std::sort(v.begin(), v.end());
  }

  int order() const { return static_cast<int>(x.size() + v.size()); }

  /// Variable slots in jet numbering (x^i -> i, v^i -> n + i).
  std::vector<int> slots(int n) const {
    std::vector<int> s(x.begin(), x.end());
    for (int q : v) s.push_back(n + q);
    return s;
  }

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;
};

/// All multi-indices over n x-slots and n v-slots with total order in [1, max_order].
inline std::vector<MultiIndex> multi_indices_up_to(int n, int max_order) {
  std::vector<MultiIndex> out;
  std::vector<int> cur;
  // Non-decreasing sequences of slots in [0, 2n).
  auto rec = [&](auto&& self, int start, int left) -> void {
    if (!cur.empty()) {
      MultiIndex mi;
      for (int s : cur) (s < n ? mi.x : mi.v).push_back(s < n ? s : s - n);
      out.push_back(mi);
    }
    if (left == 0) return;
    for (int s = start; s < 2 * n; ++s) {
      cur.push_back(s);
      self(self, s, left - 1);
      cur.pop_back();
    }
  };
  rec(rec, 0, max_order);
  return out;
}

/// Scalar field on TM_0 evaluable with doubles and with jets.
template <class F>
concept ScalarField = requires(const F& f, std::span<const double> xd, std::span<const Jet> xj) {
  { f(xd, xd) } -> std::convertible_to<double>;
  { f(xj, xj) } -> std::convertible_to<Jet>;
};

template <class F>
concept HasDomain = requires(const F& f, std::span<const double> x) {
  { f.in_domain(x) } -> std::convertible_to<bool>;
};

template <class F>
bool field_in_domain(const F& f, std::span<const double> x) {
  if constexpr (HasDomain<F>) {
    return f.in_domain(x);
  } else {
    return true;
  }
}

/// Truncated Taylor data of a scalar at a support element.
class JetValue {
 public:
  JetValue(Jet jet, int n, int order_x, int order_v)
      : jet_(std::move(jet)), n_(n), order_x_(order_x), order_v_(order_v) {}

  double value() const { return jet_.value(); }
  int order_x() const { return order_x_; }
  int order_v() const { return order_v_; }

  double partial(const MultiIndex& mi) const {
    if (static_cast<int>(mi.x.size()) > order_x_ || static_cast<int>(mi.v.size()) > order_v_)
      throw BudgetError("partial order exceeds the evaluated jet orders");
    for (int q : mi.x)
      if (q < 0 || q >= n_) throw BudgetError("multi-index x-slot out of range");
    for (int q : mi.v)
      if (q < 0 || q >= n_) throw BudgetError("multi-index v-slot out of range");
    return jet_.partial(mi.slots(n_));
  }

  const Jet& jet() const { return jet_; }

 private:
  Jet jet_;
  int n_;
  int order_x_;
  int order_v_;
};

inline void require_support(const SupportElement& z) {
  if (z.x.size() != z.v.size() || z.x.empty()) throw DomainError("support element: x and v must have equal, nonzero length");
  if (euclidean_norm(z.v) < kMinDirectionNorm) throw DomainError("support element: v must be nonzero (|v| >= 1e-8)");
  for (double e : z.x)
    if (!std::isfinite(e)) throw DomainError("support element: non-finite x");
  for (double e : z.v)
    if (!std::isfinite(e)) throw DomainError("support element: non-finite v");
}

/// Seeds (x, v) as jet variables and evaluates f.
template <ScalarField F>
Jet seed_and_evaluate(const F& f, const SupportElement& z, const JetSpace& space) {
  const int n = z.dim();
  std::vector<Jet> xs, vs;
  xs.reserve(n);
  vs.reserve(n);
  for (int q = 0; q < n; ++q) xs.push_back(Jet::variable(space, q, z.x[q]));
  for (int q = 0; q < n; ++q) vs.push_back(Jet::variable(space, n + q, z.v[q]));
  return f(std::span<const Jet>(xs), std::span<const Jet>(vs));
}

/// All mixed partials of f at z with at most order_x x-derivatives and
/// order_v v-derivatives.
template <ScalarField F>
JetValue evaluate_jet(const F& f, const SupportElement& z, int order_x, int order_v) {
  require_support(z);
  if (!field_in_domain(f, z.x)) throw DomainError("evaluate_jet: x outside the metric domain");
  if (order_x < 0 || order_v < 0 || order_x > kMaxOrderX || order_v > kMaxOrderV || order_x + order_v > kMaxOrderTotal)
    throw BudgetError("evaluate_jet: order budget exceeded (order_x <= 4, order_v <= 6, sum <= 8)");
  const auto& space = JetSpace::get(z.dim(), order_x, order_x + order_v);
  return JetValue(seed_and_evaluate(f, z, space), z.dim(), order_x, order_v);
}

/// Step used when cross-checking jets against finite differences: the default
/// 1e-3 for orders <= 2, 2e-3 for order 3 and above, where the rounding term
/// eps |f| / h^order would otherwise reach 1e-5.
inline double cross_check_step(int order) { return order >= 3 ? 2e-3 : 1e-3; }

/// Central-difference estimate of a mixed partial with one Richardson level.
///
/// Each variable of multiplicity m uses the centred m-th difference with
/// spacing h_q = step * (1 + |coordinate|); the tensor-product stencil has an
/// even error expansion in h, so combining h and h/2 as (4 D(h/2) - D(h)) / 3
/// leaves an O(step^4) truncation error.
template <class F>
double finite_difference_partial(const F& f, const SupportElement& z, const MultiIndex& mi, double step = 1e-3) {
  require_support(z);
  if (!(step > 0.0)) throw NumericalError("finite_difference_partial: step must be positive");
  if (step < 1e-12) throw NumericalError("finite_difference_partial: step underflow");
  if (mi.order() > 4) throw BudgetError("finite_difference_partial: total order must be <= 4");
  const int n = z.dim();

  // Distinct variables with multiplicities.
  std::vector<std::pair<int, int>> vars;  // (slot, multiplicity)
  for (int s : mi.slots(n)) {
    if (s < 0 || s >= 2 * n) throw BudgetError("finite_difference_partial: slot out of range");
    if (!vars.empty() && vars.back().first == s)
      ++vars.back().second;
    else
      vars.push_back({s, 1});
  }

  std::vector<double> base(2 * n);
  for (int q = 0; q < n; ++q) {
    base[q] = z.x[q];
    base[n + q] = z.v[q];
  }

  auto eval_at = [&](const std::vector<double>& p) {
    std::span<const double> xs(p.data(), n), vs(p.data() + n, n);
    if (!field_in_domain(f, xs)) throw DomainError("finite_difference_partial: stencil point leaves the domain");
    if (euclidean_norm(vs) < kMinDirectionNorm) throw DomainError("finite_difference_partial: stencil reaches v = 0");
    return static_cast<double>(f(xs, vs));
  };

  auto difference = [&](double scale) {
    std::vector<double> h(vars.size());
    for (std::size_t a = 0; a < vars.size(); ++a) h[a] = scale * step * (1.0 + std::abs(base[vars[a].first]));
    // Iterate over the tensor-product stencil.
    std::vector<int> idx(vars.size(), 0);
    double sum = 0.0;
    std::vector<double> p = base;
    // Integer weights keep the sum exact for constant fields; 1/h^m is applied once.
    double denom = 1.0;
    for (std::size_t a = 0; a < vars.size(); ++a) denom *= std::pow(h[a], vars[a].second);
    while (true) {
      double w = 1.0;
      for (std::size_t a = 0; a < vars.size(); ++a) {
        const int m = vars[a].second;
        const int j = idx[a];
        double binom = 1.0;
        for (int t = 1; t <= j; ++t) binom = binom * (m - t + 1) / t;
        w *= (j % 2) ? -binom : binom;
        p[vars[a].first] = base[vars[a].first] + (0.5 * m - j) * h[a];
      }
      sum += w * eval_at(p);
      std::size_t a = 0;
      for (; a < vars.size(); ++a) {
        if (++idx[a] <= vars[a].second) break;
        idx[a] = 0;
      }
      if (a == vars.size()) break;
    }
    return sum / denom;
  };

  if (vars.empty()) return eval_at(base);
  const double coarse = difference(1.0);
  const double fine = difference(0.5);
  return (4.0 * fine - coarse) / 3.0;
}

}  // namespace finsler
