#pragma once

// Built-in Finsler metric families.  Every family evaluates F^2 as a template
// over the scalar type so the same expression serves plain doubles (oracles,
// integrator diagnostics) and jets (all tensor computations).

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"
#include "finsler/support.hpp"

namespace finsler {

enum class Family { euclidean, riemannian_closed_form, randers, minkowski_quartic, funk_disk, product };

enum class ClosedForm { sphere, poincare_ball };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::euclidean: return "euclidean";
    case Family::riemannian_closed_form: return "riemannian_closed_form";
    case Family::randers: return "randers";
    case Family::minkowski_quartic: return "minkowski_quartic";
    case Family::funk_disk: return "funk_disk";
    case Family::product: return "product";
  }
  return "unknown";
}

inline const char* to_string(ClosedForm f) { return f == ClosedForm::sphere ? "sphere" : "poincare_ball"; }

/// Declarative description of a metric: family, dimension and parameters.
struct MetricSpec {
  Family family = Family::euclidean;
  int dimension = 2;
  // riemannian_closed_form
  ClosedForm form = ClosedForm::sphere;
  double radius = 1.0;
  // randers: b_i(x) = b_i + b_gradient[i][j] x^j (row-major, empty means zero)
  std::vector<double> b;
  std::vector<double> b_gradient;
  // minkowski_quartic
  double epsilon = 1.0;
  // product (Riemannian factors only)
  std::vector<MetricSpec> factors;
};

namespace detail {

inline double sqrt(double a) { return std::sqrt(a); }

template <class S>
S dot(std::span<const S> a, std::span<const S> b) {
  S s = a[0] * b[0];
  for (std::size_t i = 1; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class S>
S sum_sq(std::span<const S> a) {
  return dot(a, a);
}

inline double sum_sq_d(std::span<const double> a) {
  double s = 0.0;
  for (double e : a) s += e * e;
  return s;
}

struct Euclidean {
  int n;
  template <class S>
  S f2(std::span<const S>, std::span<const S> v) const {
    return sum_sq(v);
  }
  bool in_domain(std::span<const double>) const { return true; }
  double conformal_factor(std::span<const double>) const { return 1.0; }
};

// a_ij = lambda(x) delta_ij with lambda = 4 r^4 / (r^2 +- |x|^2)^2.
struct ConformallyFlat {
  int n;
  ClosedForm form;
  double r;
  template <class S>
  S f2(std::span<const S> x, std::span<const S> v) const {
    const double r2 = r * r;
    const S xx = sum_sq(x);
    const S den = form == ClosedForm::sphere ? r2 + xx : r2 - xx;
    return (4.0 * r2 * r2) * sum_sq(v) / (den * den);
  }
  bool in_domain(std::span<const double> x) const {
    return form == ClosedForm::sphere || sum_sq_d(x) < r * r;
  }
  double conformal_factor(std::span<const double> x) const {
    const double r2 = r * r;
    const double den = form == ClosedForm::sphere ? r2 + sum_sq_d(x) : r2 - sum_sq_d(x);
    return 4.0 * r2 * r2 / (den * den);
  }
};

struct Randers {
  int n;
  std::vector<double> b;
  std::vector<double> grad;  // n*n or empty

  double drift(int i, std::span<const double> x) const {
    double s = b[i];
    if (!grad.empty())
      for (int j = 0; j < n; ++j) s += grad[i * n + j] * x[j];
    return s;
  }
  template <class S>
  S f2(std::span<const S> x, std::span<const S> v) const {
    S beta = 0.0;
    for (int i = 0; i < n; ++i) {
      S bi = b[i];
      if (!grad.empty())
        for (int j = 0; j < n; ++j)
          if (grad[i * n + j] != 0.0) bi += grad[i * n + j] * x[j];
      beta += bi * v[i];
    }
    const S F = sqrt(sum_sq(v)) + beta;
    return F * F;
  }
  bool in_domain(std::span<const double> x) const {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += drift(i, x) * drift(i, x);
    return s < 1.0;
  }
};

struct Quartic {
  int n;
  double eps;
  template <class S>
  S f2(std::span<const S>, std::span<const S> v) const {
    std::vector<S> sq;
    sq.reserve(v.size());
    for (const auto& e : v) sq.push_back(e * e);
    S q = sq[0] * sq[0];
    for (int i = 1; i < n; ++i) q += sq[i] * sq[i];
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) q += eps * (sq[i] * sq[j]);
    return sqrt(q);
  }
  bool in_domain(std::span<const double>) const { return true; }
};

struct Funk {
  int n;
  template <class S>
  S f2(std::span<const S> x, std::span<const S> v) const {
    const S one_minus = 1.0 - sum_sq(x);
    const S xv = dot(x, v);
    const S F = (sqrt(one_minus * sum_sq(v) + xv * xv) + xv) / one_minus;
    return F * F;
  }
  bool in_domain(std::span<const double> x) const { return sum_sq_d(x) < 1.0; }
};

struct Product {
  struct Factor {
    std::variant<Euclidean, ConformallyFlat> metric;
    int offset;
    int dim;
  };
  int n;
  std::vector<Factor> factors;

  template <class S>
  S f2(std::span<const S> x, std::span<const S> v) const {
    S s = 0.0;
    for (const auto& fac : factors) {
      auto xs = x.subspan(fac.offset, fac.dim);
      auto vs = v.subspan(fac.offset, fac.dim);
      s += std::visit([&](const auto& m) { return m.template f2<S>(xs, vs); }, fac.metric);
    }
    return s;
  }
  bool in_domain(std::span<const double> x) const {
    for (const auto& fac : factors) {
      auto xs = x.subspan(fac.offset, fac.dim);
      if (!std::visit([&](const auto& m) { return m.in_domain(xs); }, fac.metric)) return false;
    }
    return true;
  }
};

}  // namespace detail

/// An evaluable Finsler metric.  Immutable after construction.
class FinslerMetric {
 public:
  using Impl = std::variant<detail::Euclidean, detail::ConformallyFlat, detail::Randers, detail::Quartic,
                            detail::Funk, detail::Product>;

  FinslerMetric(MetricSpec spec, Impl impl) : spec_(std::move(spec)), impl_(std::move(impl)) {}

  const MetricSpec& spec() const { return spec_; }
  int dim() const { return spec_.dimension; }
  Family family() const { return spec_.family; }

  template <class S>
  S f2(std::span<const S> x, std::span<const S> v) const {
    return std::visit([&](const auto& m) { return m.template f2<S>(x, v); }, impl_);
  }

  double F(std::span<const double> x, std::span<const double> v) const { return std::sqrt(f2<double>(x, v)); }
  double F(const SupportElement& z) const { return F(z.x, z.v); }

  bool in_domain(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim()) return false;
    for (double e : x)
      if (!std::isfinite(e)) return false;
    return std::visit([&](const auto& m) { return m.in_domain(x); }, impl_);
  }

  bool is_riemannian() const {
    switch (family()) {
      case Family::euclidean:
      case Family::riemannian_closed_form:
      case Family::product: return true;
      default: return false;
    }
  }

  /// Families whose geodesic completeness is declared (not proven here).
  bool declared_complete() const {
    switch (family()) {
      case Family::euclidean:
      case Family::minkowski_quartic: return true;
      case Family::riemannian_closed_form: return spec_.form == ClosedForm::sphere;
      case Family::randers: return spec_.b_gradient.empty();
      case Family::product:
        return std::all_of(spec_.factors.begin(), spec_.factors.end(), [](const MetricSpec& f) {
          return f.family == Family::euclidean || f.form == ClosedForm::sphere;
        });
      case Family::funk_disk: return false;
    }
    return false;
  }

  /// Constant flag curvature when the family is known to have one.
  std::optional<double> known_flag_curvature() const {
    switch (family()) {
      case Family::euclidean:
      case Family::minkowski_quartic: return 0.0;
      case Family::randers:
        if (spec_.b_gradient.empty()) return 0.0;
        return std::nullopt;
      case Family::riemannian_closed_form: {
        const double k = 1.0 / (spec_.radius * spec_.radius);
        return spec_.form == ClosedForm::sphere ? k : -k;
      }
      case Family::funk_disk: return -0.25;
      case Family::product: return std::nullopt;
    }
    return std::nullopt;
  }

  /// Closed-form a_ij(x) for Riemannian families (row-major), evaluated
  /// directly from the family formula without any differentiation.
  std::optional<std::vector<double>> riemannian_matrix(std::span<const double> x) const {
    const int n = dim();
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
    if (const auto* e = std::get_if<detail::Euclidean>(&impl_)) {
      (void)e;
      for (int i = 0; i < n; ++i) a[i * n + i] = 1.0;
      return a;
    }
    if (const auto* c = std::get_if<detail::ConformallyFlat>(&impl_)) {
      const double lam = c->conformal_factor(x);
      for (int i = 0; i < n; ++i) a[i * n + i] = lam;
      return a;
    }
    if (const auto* p = std::get_if<detail::Product>(&impl_)) {
      for (const auto& fac : p->factors) {
        const double lam =
            std::visit([&](const auto& m) { return m.conformal_factor(x.subspan(fac.offset, fac.dim)); }, fac.metric);
        for (int i = fac.offset; i < fac.offset + fac.dim; ++i) a[i * n + i] = lam;
      }
      return a;
    }
    return std::nullopt;
  }

  /// Half-width of the coordinate box used for random sampling.
  double sample_half_width() const {
    const int n = dim();
    switch (family()) {
      case Family::euclidean:
      case Family::minkowski_quartic: return 1.0;
      case Family::riemannian_closed_form:
        return spec_.form == ClosedForm::sphere ? 0.8 * spec_.radius : 0.5 * spec_.radius / std::sqrt(double(n));
      case Family::randers: {
        if (spec_.b_gradient.empty()) return 1.0;
        double gnorm = 0.0;
        for (double e : spec_.b_gradient) gnorm += e * e;
        double bnorm = 0.0;
        for (double e : spec_.b) bnorm += e * e;
        const double slack = 1.0 - std::sqrt(bnorm);
        return std::min(0.5, 0.5 * slack / (std::sqrt(gnorm) * std::sqrt(double(n))));
      }
      case Family::funk_disk: return 0.6 / std::sqrt(double(n));
      case Family::product: {
        double w = 1.0;
        for (const auto& f : spec_.factors)
          if (f.family == Family::riemannian_closed_form)
            w = std::min(w, f.form == ClosedForm::sphere ? 0.8 * f.radius : 0.5 * f.radius / std::sqrt(double(f.dimension)));
        return w;
      }
    }
    return 1.0;
  }

 private:
  MetricSpec spec_;
  Impl impl_;
};

/// Checks the per-family invariants of a spec; throws ParameterError naming the field.
inline void check_spec(const MetricSpec& s) {
  if (s.dimension < 2 || s.dimension > JetSpace::kMaxDim)
    throw ParameterError("dimension", "dimension must be in [2, 8]");
  switch (s.family) {
    case Family::euclidean:
    case Family::funk_disk: break;
    case Family::riemannian_closed_form:
      if (!(s.radius > 0.0) || !std::isfinite(s.radius)) throw ParameterError("radius", "radius must be > 0");
      break;
    case Family::randers: {
      if (static_cast<int>(s.b.size()) != s.dimension) throw ParameterError("b", "b must have `dimension` entries");
      double nb = 0.0;
      for (double e : s.b) {
        if (!std::isfinite(e)) throw ParameterError("b", "b entries must be finite");
        nb += e * e;
      }
      if (!(std::sqrt(nb) < 1.0)) throw ParameterError("b", "b norm must be < 1");
      if (!s.b_gradient.empty() && static_cast<int>(s.b_gradient.size()) != s.dimension * s.dimension)
        throw ParameterError("b_gradient", "b_gradient must be a dimension x dimension matrix");
      for (double e : s.b_gradient)
        if (!std::isfinite(e)) throw ParameterError("b_gradient", "b_gradient entries must be finite");
      break;
    }
    case Family::minkowski_quartic:
      // Strong convexity fails outside (0, 6) (checked numerically elsewhere for interior values).
      if (!(s.epsilon > 0.0 && s.epsilon < 6.0)) throw ParameterError("epsilon", "epsilon must be in (0, 6)");
      break;
    case Family::product: {
      if (s.factors.size() < 2) throw ParameterError("factors", "product needs at least two factors");
      int sum = 0;
      for (const auto& f : s.factors) {
        if (f.family != Family::euclidean && f.family != Family::riemannian_closed_form)
          throw ParameterError("factors", "product factors must be euclidean or riemannian_closed_form");
        if (f.dimension < 1) throw ParameterError("factors", "factor dimension must be >= 1");
        if (f.family == Family::riemannian_closed_form && !(f.radius > 0.0))
          throw ParameterError("factors", "factor radius must be > 0");
        sum += f.dimension;
      }
      if (sum != s.dimension) throw ParameterError("dimension", "factor dimensions must sum to dimension");
      break;
    }
  }
}

inline FinslerMetric make_metric(const MetricSpec& spec) {
  check_spec(spec);
  const int n = spec.dimension;
  switch (spec.family) {
    case Family::euclidean: return {spec, detail::Euclidean{n}};
    case Family::riemannian_closed_form: return {spec, detail::ConformallyFlat{n, spec.form, spec.radius}};
    case Family::randers: return {spec, detail::Randers{n, spec.b, spec.b_gradient}};
    case Family::minkowski_quartic: return {spec, detail::Quartic{n, spec.epsilon}};
    case Family::funk_disk: return {spec, detail::Funk{n}};
    case Family::product: {
      detail::Product p{n, {}};
      int off = 0;
      for (const auto& f : spec.factors) {
        detail::Product::Factor fac{detail::Euclidean{f.dimension}, off, f.dimension};
        if (f.family == Family::riemannian_closed_form)
          fac.metric = detail::ConformallyFlat{f.dimension, f.form, f.radius};
        p.factors.push_back(fac);
        off += f.dimension;
      }
      return {spec, p};
    }
  }
  throw ParameterError("family", "unsupported family");
}

/// Field adaptor exposing F^2 of a metric to the jet calculus.
struct SquaredNorm {
  const FinslerMetric* metric;
  template <class S>
  S operator()(std::span<const S> x, std::span<const S> v) const {
    return metric->f2<S>(x, v);
  }
  bool in_domain(std::span<const double> x) const { return metric->in_domain(x); }
};

/// Field adaptor exposing F itself.
struct Norm {
  const FinslerMetric* metric;
  template <class S>
  S operator()(std::span<const S> x, std::span<const S> v) const {
    using detail::sqrt;
    return sqrt(metric->f2<S>(x, v));
  }
  bool in_domain(std::span<const double> x) const { return metric->in_domain(x); }
};

/// Throws DomainError unless z is a valid support element of the metric.
inline void require_in_domain(const FinslerMetric& m, const SupportElement& z) {
  if (z.dim() != m.dim() || static_cast<int>(z.v.size()) != m.dim())
    throw DomainError("support element dimension does not match the metric");
  if (euclidean_norm(z.v) < kMinDirectionNorm) throw DomainError("support element: v must be nonzero (|v| >= 1e-8)");
  if (!m.in_domain(z.x)) throw DomainError("support element: x outside the metric domain");
}

}  // namespace finsler
