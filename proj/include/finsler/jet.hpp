#pragma once

// Truncated multivariate Taylor arithmetic ("jets") over the 2n coordinates
// (x^1..x^n, v^1..v^n) of the slit tangent bundle.
//
// A jet stores the Taylor coefficients c_m of a scalar about a base point,
// indexed by monomials m in the displacements.  Monomials are truncated by
// total degree and by x-degree, which keeps every arithmetic operation closed
// (the truncation is an ideal of the polynomial ring).  Differentiating a jet
// yields another jet whose valid degrees are one lower; coefficients beyond
// the valid degrees are never read, and products cannot move them into valid
// slots, so no explicit clean-up is needed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "finsler/errors.hpp"

namespace finsler {

/// Monomial table and product/derivative index maps for one truncation.
///
/// Instances are interned by (dim, x_cap, total) and live for the program's
/// lifetime, so jets can hold a plain pointer to their space.
class JetSpace {
 public:
  static constexpr int kMaxDim = 8;
  static constexpr int kMaxTotal = 15;

  struct Term {
    int a;
    int b;
  };

  static const JetSpace& get(int dim, int x_cap, int total) {
    if (dim < 1 || dim > kMaxDim) throw BudgetError("jet space: dimension must be in [1, 8]");
    if (total < 0 || total > kMaxTotal) throw BudgetError("jet space: total order must be in [0, 15]");
    x_cap = std::clamp(x_cap, 0, total);
    static std::mutex mutex;
    static std::map<std::array<int, 3>, std::unique_ptr<JetSpace>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{dim, x_cap, total}];
    if (!slot) slot.reset(new JetSpace(dim, x_cap, total));
    return *slot;
  }

  int dim() const { return dim_; }
  int num_vars() const { return 2 * dim_; }
  int x_cap() const { return x_cap_; }
  int total() const { return total_; }
  int size() const { return static_cast<int>(degree_.size()); }

  int degree(int m) const { return degree_[m]; }
  int x_degree(int m) const { return x_degree_[m]; }
  std::span<const std::uint8_t> exponents(int m) const {
    return {exps_.data() + static_cast<std::size_t>(m) * num_vars(), static_cast<std::size_t>(num_vars())};
  }

  /// Index of the monomial with the given exponents, or -1 if truncated away.
  int index_of(std::span<const int> exps) const {
    std::uint64_t key = 0;
    int deg = 0, xdeg = 0;
    for (int q = 0; q < num_vars(); ++q) {
      if (exps[q] < 0) return -1;
      deg += exps[q];
      if (q < dim_) xdeg += exps[q];
      if (exps[q] > 15) return -1;
      key |= static_cast<std::uint64_t>(exps[q]) << (4 * q);
    }
    if (deg > total_ || xdeg > x_cap_) return -1;
    auto it = index_.find(key);
    return it == index_.end() ? -1 : it->second;
  }

  /// Index of m + e_var, or -1.
  int raise(int var, int m) const { return raise_[static_cast<std::size_t>(var) * size() + m]; }

  std::span<const Term> product_terms(int c) const {
    return {terms_.data() + term_offset_[c], static_cast<std::size_t>(term_offset_[c + 1] - term_offset_[c])};
  }

 private:
  JetSpace(int dim, int x_cap, int total) : dim_(dim), x_cap_(x_cap), total_(total) {
    const int nv = 2 * dim;
    std::vector<int> e(nv, 0);
    for (int d = 0; d <= total; ++d) enumerate(e, 0, d);

    const int sz = size();
    raise_.assign(static_cast<std::size_t>(nv) * sz, -1);
    std::vector<int> tmp(nv);
    for (int m = 0; m < sz; ++m) {
      auto ex = exponents(m);
      for (int q = 0; q < nv; ++q) {
        for (int r = 0; r < nv; ++r) tmp[r] = ex[r];
        ++tmp[q];
        raise_[static_cast<std::size_t>(q) * sz + m] = index_of(tmp);
      }
    }

    std::vector<std::vector<Term>> by_c(sz);
    for (int a = 0; a < sz; ++a) {
      auto ea = exponents(a);
      for (int b = 0; b < sz; ++b) {
        if (degree_[a] + degree_[b] > total_ || x_degree_[a] + x_degree_[b] > x_cap_) continue;
        auto eb = exponents(b);
        for (int r = 0; r < nv; ++r) tmp[r] = ea[r] + eb[r];
        const int c = index_of(tmp);
        if (c >= 0) by_c[c].push_back({a, b});
      }
    }
    term_offset_.assign(sz + 1, 0);
    for (int c = 0; c < sz; ++c) term_offset_[c + 1] = term_offset_[c] + static_cast<int>(by_c[c].size());
    terms_.reserve(term_offset_[sz]);
    for (auto& v : by_c) terms_.insert(terms_.end(), v.begin(), v.end());
  }

  void enumerate(std::vector<int>& e, int q, int remaining) {
    const int nv = 2 * dim_;
    if (q == nv - 1) {
      e[q] = remaining;
      int xdeg = 0, deg = 0;
      for (int r = 0; r < nv; ++r) {
        deg += e[r];
        if (r < dim_) xdeg += e[r];
      }
      if (xdeg <= x_cap_) {
        std::uint64_t key = 0;
        for (int r = 0; r < nv; ++r) {
          exps_.push_back(static_cast<std::uint8_t>(e[r]));
          key |= static_cast<std::uint64_t>(e[r]) << (4 * r);
        }
        index_.emplace(key, static_cast<int>(degree_.size()));
        degree_.push_back(deg);
        x_degree_.push_back(xdeg);
      }
      e[q] = 0;
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      e[q] = k;
      enumerate(e, q + 1, remaining - k);
    }
    e[q] = 0;
  }

  int dim_, x_cap_, total_;
  std::vector<std::uint8_t> exps_;
  std::vector<int> degree_, x_degree_;
  std::unordered_map<std::uint64_t, int> index_;
  std::vector<int> raise_;
  std::vector<Term> terms_;
  std::vector<int> term_offset_;
};

/// Truncated Taylor expansion of a scalar about a support element.
///
/// A default-constructed jet is the constant 0 and carries no space; it adopts
/// the space of the first jet it is combined with.
class Jet {
 public:
  static constexpr int kUnbounded = std::numeric_limits<int>::max() / 4;

  Jet() : c_(1, 0.0) {}
  Jet(double value) : c_(1, value) {}  // NOLINT: implicit by design of the scalar concept
  Jet(const JetSpace& s, double value) : space_(&s), c_(s.size(), 0.0), vx_(s.x_cap()), vt_(s.total()) {
    c_[0] = value;
  }

  static Jet variable(const JetSpace& s, int var, double value) {
    Jet j(s, value);
    std::vector<int> e(s.num_vars(), 0);
    e[var] = 1;
    const int m = s.index_of(e);
    if (m >= 0) j.c_[m] = 1.0;
    return j;
  }

  const JetSpace* space() const { return space_; }
  double value() const { return c_[0]; }
  int x_validity() const { return vx_; }
  int total_validity() const { return vt_; }

  /// Raw Taylor coefficient of monomial m (not scaled by factorials).
  double coeff(int m) const { return space_ ? c_[m] : (m == 0 ? c_[0] : 0.0); }

  bool valid(int m) const {
    if (!space_) return true;
    return space_->x_degree(m) <= vx_ && space_->degree(m) <= vt_;
  }

  /// Mixed partial derivative at the base point; `vars` lists variable slots
  /// with repetition (x^i -> i, v^i -> n + i).
  double partial(std::span<const int> vars) const {
    if (!space_) return vars.empty() ? c_[0] : 0.0;
    std::vector<int> e(space_->num_vars(), 0);
    for (int q : vars) ++e[q];
    const int m = space_->index_of(e);
    if (m < 0 || !valid(m)) throw BudgetError("jet: requested partial exceeds the truncation order");
    double fact = 1.0;
    for (int k : e)
      for (int i = 2; i <= k; ++i) fact *= i;
    return fact * c_[m];
  }

  /// First partial with respect to one variable, evaluated at the base point.
  double first(int var) const {
    if (!space_) return 0.0;
    const int m = space_->raise(var, 0);
    if (m < 0 || !valid(m)) throw BudgetError("jet: first derivative exceeds the truncation order");
    return c_[m];
  }

  /// Jet of the partial derivative with respect to variable `var`.
  Jet derivative(int var) const {
    if (!space_) return Jet();
    Jet out(*space_, 0.0);
    out.c_[0] = 0.0;
    const int sz = space_->size();
    const auto& sp = *space_;
    for (int m = 0; m < sz; ++m) {
      const int up = sp.raise(var, m);
      if (up >= 0) out.c_[m] = (sp.exponents(m)[var] + 1) * c_[up];
    }
    out.vt_ = vt_ - 1;
    out.vx_ = var < sp.dim() ? vx_ - 1 : std::min(vx_, vt_ - 1);
    return out;
  }

  Jet operator-() const {
    Jet r = *this;
    for (double& e : r.c_) e = -e;
    return r;
  }

  Jet& operator+=(const Jet& o) {
    adopt(o);
    if (o.space_) {
      for (std::size_t m = 0; m < c_.size(); ++m) c_[m] += o.c_[m];
      vx_ = std::min(vx_, o.vx_);
      vt_ = std::min(vt_, o.vt_);
    } else {
      c_[0] += o.c_[0];
    }
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    adopt(o);
    if (o.space_) {
      for (std::size_t m = 0; m < c_.size(); ++m) c_[m] -= o.c_[m];
      vx_ = std::min(vx_, o.vx_);
      vt_ = std::min(vt_, o.vt_);
    } else {
      c_[0] -= o.c_[0];
    }
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& e : c_) e *= s;
    return *this;
  }
  Jet& operator*=(const Jet& o) {
    *this = *this * o;
    return *this;
  }
  Jet& operator/=(const Jet& o) {
    *this = *this / o;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, double s) { return a *= (1.0 / s); }

  friend Jet operator*(const Jet& a, const Jet& b) {
    if (!a.space_) return b * a.c_[0];
    if (!b.space_) return a * b.c_[0];
    const auto& sp = *a.space_;
    Jet out(sp, 0.0);
    out.vx_ = std::min(a.vx_, b.vx_);
    out.vt_ = std::min(a.vt_, b.vt_);
    const int sz = sp.size();
    const double* pa = a.c_.data();
    const double* pb = b.c_.data();
    for (int c = 0; c < sz; ++c) {
      if (sp.degree(c) > out.vt_ || sp.x_degree(c) > out.vx_) continue;
      double s = 0.0;
      for (const auto& t : sp.product_terms(c)) s += pa[t.a] * pb[t.b];
      out.c_[c] = s;
    }
    return out;
  }

  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
  friend Jet operator/(double s, const Jet& b) { return reciprocal(b) * s; }

  /// Applies a univariate function given its Taylor coefficients about value().
  /// coeffs[k] = f^(k)(value()) / k!; higher powers of the nilpotent part vanish.
  Jet compose(const std::vector<double>& coeffs) const {
    if (!space_) return Jet(coeffs.empty() ? 0.0 : coeffs[0]);
    Jet h = *this;
    h.c_[0] = 0.0;
    const int order = std::min<int>(static_cast<int>(coeffs.size()) - 1, std::min(vt_, space_->total()));
    Jet r(*space_, coeffs[std::max(order, 0)]);
    r.vx_ = vx_;
    r.vt_ = vt_;
    for (int k = order - 1; k >= 0; --k) {
      r = r * h;
      r.c_[0] += coeffs[k];
    }
    return r;
  }

  int compose_order() const { return space_ ? std::min(vt_, space_->total()) : 0; }

  friend Jet reciprocal(const Jet& a) {
    const double x0 = a.value();
    if (x0 == 0.0) throw NumericalError("jet: division by a jet with zero value");
    const int K = a.compose_order();
    std::vector<double> co(K + 1);
    double p = 1.0 / x0;
    for (int k = 0; k <= K; ++k) {
      co[k] = (k % 2 == 0 ? p : -p);
      p /= x0;
    }
    return a.compose(co);
  }

  friend Jet pow(const Jet& a, double expo) {
    const double x0 = a.value();
    if (x0 <= 0.0) throw NumericalError("jet: pow of a non-positive value");
    const int K = a.compose_order();
    std::vector<double> co(K + 1);
    double binom = 1.0;
    for (int k = 0; k <= K; ++k) {
      co[k] = binom * std::pow(x0, expo - k);
      binom *= (expo - k) / (k + 1);
    }
    return a.compose(co);
  }

  friend Jet sqrt(const Jet& a) { return pow(a, 0.5); }

 private:
  void adopt(const Jet& o) {
    if (space_ || !o.space_) return;
    const double v = c_[0];
    *this = Jet(*o.space_, v);
    vx_ = o.vx_;
    vt_ = o.vt_;
  }

  const JetSpace* space_ = nullptr;
  std::vector<double> c_;
  int vx_ = kUnbounded;
  int vt_ = kUnbounded;
};

inline Jet operator+(Jet a, double s) { return a += Jet(s); }
inline Jet operator+(double s, Jet a) { return a += Jet(s); }
inline Jet operator-(Jet a, double s) { return a -= Jet(s); }
inline Jet operator-(double s, const Jet& a) { return Jet(s) - a; }

}  // namespace finsler
