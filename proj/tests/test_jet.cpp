#include <gtest/gtest.h>

#include <cmath>

#include "finsler/jet_calculus.hpp"
#include "finsler/metric.hpp"
#include "test_support.hpp"

using namespace finsler;
using namespace finsler::testing;

namespace {

struct Cubic {
  // f = x0^2 v1 + 3 x1 v0^3 + 7
  template <class S>
  S operator()(std::span<const S> x, std::span<const S> v) const {
    return x[0] * x[0] * v[1] + 3.0 * x[1] * v[0] * v[0] * v[0] + 7.0;
  }
};

struct Constant {
  template <class S>
  S operator()(std::span<const S>, std::span<const S>) const {
    return S(4.25);
  }
};

}  // namespace

TEST(Jet, ArithmeticAndCompose) {
  const auto& sp = JetSpace::get(1, 0, 6);
  const Jet t = Jet::variable(sp, 1, 0.3);  // slot 1 is v^0
  const Jet e = sqrt(1.0 + t * t);
  // d/dt sqrt(1+t^2) = t / sqrt(1+t^2); second derivative = (1+t^2)^(-3/2).
  EXPECT_NEAR(e.value(), std::sqrt(1.09), 1e-15);
  EXPECT_NEAR(e.partial(std::vector<int>{1}), 0.3 / std::sqrt(1.09), 1e-15);
  EXPECT_NEAR(e.partial(std::vector<int>{1, 1}), std::pow(1.09, -1.5), 1e-14);
  const Jet r = 1.0 / (1.0 - t);  // derivatives m! / (1-t)^(m+1)
  EXPECT_NEAR(r.partial(std::vector<int>{1, 1, 1, 1, 1}), 120.0 / std::pow(0.7, 6), 1e-8);
}

TEST(Jet, MixedPartialsOfPolynomial) {
  const SupportElement z{{0.5, -1.5}, {2.0, 0.25}};
  const JetValue j = evaluate_jet(Cubic{}, z, 2, 3);
  EXPECT_DOUBLE_EQ(j.value(), 0.25 * 0.25 + 3.0 * -1.5 * 8.0 + 7.0);
  EXPECT_DOUBLE_EQ(j.partial({{0, 0}, {1}}), 2.0);
  EXPECT_DOUBLE_EQ(j.partial({{1}, {0, 0, 0}}), 18.0);
  EXPECT_DOUBLE_EQ(j.partial({{1}, {0, 0}}), 36.0);
  EXPECT_DOUBLE_EQ(j.partial({{}, {1, 1}}), 0.0);
}

TEST(Jet, SchwarzSymmetryIsStoredCanonically) {
  const FinslerMetric m = make_metric(funk(3));
  const SupportElement z{{0.1, -0.2, 0.3}, {0.4, 0.1, -0.7}};
  const JetValue j = evaluate_jet(SquaredNorm{&m}, z, 2, 3);
  EXPECT_EQ(j.partial({{0, 2}, {1}}), j.partial({{2, 0}, {1}}));
  EXPECT_EQ(j.partial({{1}, {2, 0, 1}}), j.partial({{1}, {0, 1, 2}}));
}

TEST(Jet, EuclideanExamples) {
  const FinslerMetric m = make_metric(euclidean(2));
  const JetValue j = evaluate_jet(SquaredNorm{&m}, {{0, 0}, {1, 0}}, 2, 2);
  EXPECT_DOUBLE_EQ(j.partial({{}, {0, 0}}), 2.0);
  // x-independent metric: every pure x-partial vanishes.
  const FinslerMetric q = make_metric(quartic(2));
  const JetValue jq = evaluate_jet(SquaredNorm{&q}, {{0.3, 0.4}, {1, 2}}, 2, 2);
  for (const auto& mi : multi_indices_up_to(2, 2))
    if (mi.v.empty()) EXPECT_EQ(jq.partial(mi), 0.0);
}

// Frozen values: exact symbolic differentiation of F^2 for F = |v| + 0.1 v^1.
TEST(Jet, RandersFrozenSymbolicValues) {
  const FinslerMetric m = make_metric(randers({0.1, 0.0}));
  const SquaredNorm f{&m};
  const JetValue a = evaluate_jet(f, {{0, 0}, {1, 0}}, 0, 3);
  EXPECT_NEAR(a.partial({{}, {0, 0, 1}}), 0.0, 1e-14);
  EXPECT_NEAR(a.partial({{}, {1, 1}}), 2.2, 1e-14);
  const JetValue b = evaluate_jet(f, {{0, 0}, {0.6, 0.8}}, 0, 3);
  EXPECT_NEAR(b.partial({{}, {1, 1, 1}}), -324.0 / 3125.0, 1e-14);
  // Finite-difference oracle agrees (step for third order).
  const double fd = finite_difference_partial(f, {{0, 0}, {1, 0}}, MultiIndex({}, {0, 0, 1}), cross_check_step(3));
  EXPECT_LT(std::abs(fd - a.partial({{}, {0, 0, 1}})) / (1.0 + std::abs(a.partial({{}, {0, 0, 1}}))), 1e-5);
}

TEST(FiniteDifference, Examples) {
  const FinslerMetric e = make_metric(euclidean(2));
  EXPECT_NEAR(finite_difference_partial(SquaredNorm{&e}, {{0.3, -2}, {0.5, 1.5}}, MultiIndex({}, {0, 0})), 2.0, 1e-8);
  for (const auto& mi : multi_indices_up_to(2, 4))
    EXPECT_NEAR(finite_difference_partial(Constant{}, {{0.1, 0.2}, {1, 0}}, mi), 0.0, 1e-10);
  const FinslerMetric s = make_metric(sphere(2, 1.0));
  const SupportElement z{{0.5, 0}, {1, 0}};
  const double fd = finite_difference_partial(SquaredNorm{&s}, z, MultiIndex({0}, {}));
  const double jet = evaluate_jet(SquaredNorm{&s}, z, 1, 0).partial({{0}, {}});
  EXPECT_LT(std::abs(fd - jet) / std::abs(jet), 1e-5);
}

TEST(FiniteDifference, Errors) {
  const FinslerMetric f = make_metric(funk(2));
  const SquaredNorm F{&f};
  EXPECT_THROW(finite_difference_partial(F, {{0, 0}, {1, 0}}, MultiIndex({}, {0}), 0.0), NumericalError);
  EXPECT_THROW(finite_difference_partial(F, {{0, 0}, {1, 0}}, MultiIndex({}, {0}), 1e-14), NumericalError);
  EXPECT_THROW(finite_difference_partial(F, {{0, 0}, {1, 0}}, MultiIndex({0, 0, 0}, {0, 1}), 1e-3), BudgetError);
  // Stencil leaves the unit disk.
  EXPECT_THROW(finite_difference_partial(F, {{0.9995, 0}, {1, 0}}, MultiIndex({0}, {}), 1e-3), DomainError);
}

TEST(Jet, DomainAndBudgetErrors) {
  const FinslerMetric f = make_metric(funk(2));
  EXPECT_THROW(evaluate_jet(SquaredNorm{&f}, {{1.2, 0}, {1, 0}}, 1, 1), DomainError);
  EXPECT_THROW(evaluate_jet(SquaredNorm{&f}, {{0, 0}, {0, 0}}, 1, 1), DomainError);
  EXPECT_THROW(evaluate_jet(SquaredNorm{&f}, {{0, 0}, {1, 0}}, 5, 1), BudgetError);
  EXPECT_THROW(evaluate_jet(SquaredNorm{&f}, {{0, 0}, {1, 0}}, 2, 7), BudgetError);
  EXPECT_THROW(evaluate_jet(SquaredNorm{&f}, {{0, 0}, {1, 0}}, 4, 5), BudgetError);
  const JetValue j = evaluate_jet(SquaredNorm{&f}, {{0, 0}, {1, 0}}, 1, 2);
  EXPECT_THROW(j.partial({{0, 1}, {}}), BudgetError);
  EXPECT_THROW(j.partial({{}, {0, 0, 0}}), BudgetError);
}

TEST(Jet, SupportsHBudget) {
  const FinslerMetric m = make_metric(randers_field());
  const JetValue j = evaluate_jet(SquaredNorm{&m}, {{0.1, 0.2}, {1, 0.3}}, 2, 5);
  EXPECT_TRUE(std::isfinite(j.partial({{0, 1}, {0, 0, 1, 1, 1}})));
}

class JetVsFd : public ::testing::TestWithParam<MetricSpec> {};

TEST_P(JetVsFd, CrossOracleUpToOrderThree) {
  const FinslerMetric m = make_metric(GetParam());
  const int n = m.dim();
  const SquaredNorm f{&m};
  const auto idx = multi_indices_up_to(n, 3);
  double worst = 0.0;
  for (const auto& z : samples(m, 25, 42)) {
    const JetValue j = evaluate_jet(f, z, 3, 3);
    for (const auto& mi : idx) {
      const double a = j.partial(mi);
      const double b = finite_difference_partial(f, z, mi, cross_check_step(mi.order()));
      worst = std::max(worst, std::abs(a - b) / (1.0 + std::abs(a)));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST_P(JetVsFd, EulerHomogeneityOfF) {
  const FinslerMetric m = make_metric(GetParam());
  const int n = m.dim();
  for (const auto& z : samples(m, 25, 43)) {
    const JetValue j = evaluate_jet(Norm{&m}, z, 0, 1);
    double s = 0.0;
    for (int q = 0; q < n; ++q) s += z.v[q] * j.partial({{}, {q}});
    EXPECT_NEAR(s, j.value(), 1e-10 * std::max(1.0, j.value()));
  }
}

INSTANTIATE_TEST_SUITE_P(Metrics, JetVsFd,
                         ::testing::Values(euclidean(3), sphere(2, 1.0), sphere(3, 2.0), sphere_times_flat(1),
                                           randers({0.1, 0.0}), randers_field(), quartic(2), quartic(3, 0.5),
                                           funk(2), funk(3)));
