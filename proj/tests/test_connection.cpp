#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "finsler/connection.hpp"
#include "finsler/jet_calculus.hpp"
#include "finsler/oracle.hpp"
#include "test_support.hpp"

using namespace finsler;
using namespace finsler::testing;

namespace {


double fd_dv(const std::function<double(const std::vector<double>&)>& f, std::vector<double> v, int j,
             double h = 1e-4) {
  std::vector<double> a = v, b = v;
  a[j] += h;
  b[j] -= h;
  return (f(a) - f(b)) / (2 * h);
}

}  // namespace

TEST(MetricTensor, Examples) {
  const auto e = make_metric(euclidean(3));
  const TensorBlock g = metric_tensor(e, {{0.3, 1, -2}, {0.2, 0.5, 1}});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(g(i, j), i == j ? 1.0 : 0.0);
  const auto s = make_metric(sphere(2, 1.0));
  const TensorBlock gs = metric_tensor(s, {{0, 0}, {0.3, -0.7}});
  EXPECT_NEAR(gs(0, 0), 4.0, 1e-14);
  EXPECT_NEAR(gs(0, 1), 0.0, 1e-14);
  EXPECT_NEAR(gs(1, 1), 4.0, 1e-14);

  const auto r = make_metric(randers({0.1, 0.0}));
  const SupportElement z{{0, 0}, {1, 0}};
  const TensorBlock gr = metric_tensor(r, z);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      EXPECT_NEAR(gr(i, j), 0.5 * finite_difference_partial(SquaredNorm{&r}, z, MultiIndex({}, {i, j})), 1e-6);
  EXPECT_NEAR(gr(1, 1), 1.1, 1e-14);
}

TEST(CartanTensor, Examples) {
  for (const auto& spec : {sphere(2, 1.0), sphere_times_flat(2)}) {
    const auto m = make_metric(spec);
    for (const auto& z : samples(m, 5, 10)) EXPECT_EQ(max_abs(cartan_tensor(m, z)), 0.0);
  }
  const auto q = make_metric(quartic(2));
  const SupportElement z{{0.2, -0.1}, {1, 1}};
  const TensorBlock T = cartan_tensor(q, z);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const double fd = 0.25 * finite_difference_partial(SquaredNorm{&q}, z, MultiIndex({}, {i, j, k}),
                                                           cross_check_step(3));
        EXPECT_NEAR(T(i, j, k), fd, 1e-6);
        EXPECT_DOUBLE_EQ(T(i, j, k), T(j, i, k));
        EXPECT_DOUBLE_EQ(T(i, j, k), T(k, j, i));
      }
}

TEST(Spray, Examples) {
  const auto e = make_metric(euclidean(2));
  EXPECT_EQ(max_abs(geodesic_spray(e, {{1, 2}, {3, 4}})), 0.0);
  const auto q = make_metric(quartic(3, 0.5));
  EXPECT_EQ(max_abs(geodesic_spray(q, {{1, 2, 3}, {0.3, -0.4, 1}})), 0.0);
  const auto s = make_metric(sphere(2, 1.0));
  const std::vector<double> x{0.5, 0.0}, v{0.0, 1.0};
  const TensorBlock G = geodesic_spray(s, {x, v});
  const auto oracle = oracle::christoffel_spray(s, x, v);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(G(i), oracle[i], 1e-10);
}

TEST(NonlinearConnection, Examples) {
  const auto e = make_metric(euclidean(2));
  const TensorBlock frame = horizontal_frame(e, {{0, 1}, {1, 1}});
  EXPECT_EQ(max_abs(frame), 0.0);

  const auto r = make_metric(randers_field());
  const SupportElement z{{0.1, -0.2}, {0.6, 0.8}};
  const TensorBlock N = nonlinear_connection(r, z);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double fd = fd_dv(
          [&](const std::vector<double>& v) { return geodesic_spray(r, {z.x, v})(i); }, z.v, j);
      EXPECT_NEAR(N(i, j), fd, 1e-6);
    }
  const TensorBlock fr = horizontal_frame(r, z);
  EXPECT_EQ(fr(1, 0), -N(1, 0));
}

TEST(Coefficients, EuclideanZero) {
  const auto e = make_metric(euclidean(3));
  const SupportElement z{{0.1, 0.2, 0.3}, {1, 0, 0}};
  EXPECT_EQ(max_abs(berwald_coefficients(e, z)), 0.0);
  const auto c = cartan_coefficients(e, z);
  EXPECT_EQ(max_abs(c.horizontal), 0.0);
  EXPECT_EQ(max_abs(c.vertical), 0.0);
}

TEST(Coefficients, SphereMatchesChristoffel) {
  for (const auto& spec : {sphere(2, 1.0), sphere(3, 2.0), sphere_times_flat(1)}) {
    const auto m = make_metric(spec);
    for (const auto& z : samples(m, 10, 11)) {
      const auto c = cartan_coefficients(m, z);
      EXPECT_LT(max_abs_diff(c.horizontal, oracle::christoffel(m, z.x)), 1e-8);
      EXPECT_EQ(max_abs(c.vertical), 0.0);
      EXPECT_LT(max_abs_diff(berwald_coefficients(m, z), c.horizontal), 1e-8);
    }
  }
}

class ConnectionInvariants : public ::testing::TestWithParam<MetricSpec> {};

TEST_P(ConnectionInvariants, Residuals) {
  const auto m = make_metric(GetParam());
  for (const auto& z : samples(m, 100, 12)) {
    const PointGeometry pg = compute_point_geometry(m, z, Depth::curvature);
    const ConnectionResiduals r = connection_residuals(pg);
    const double s = tensor_scale(pg.gamma);
    EXPECT_LT(r.inverse, 1e-10);
    EXPECT_LT(r.cartan_v_contraction, 1e-9);
    EXPECT_LT(r.spray_euler, 1e-9 * std::max(1.0, max_abs(pg.spray)));
    EXPECT_LT(r.metric_compatibility, 1e-8 * s);
    EXPECT_EQ(r.gamma_symmetry, 0.0);
    EXPECT_LT(r.berwald_cartan, 1e-7 * s);
  }
}

TEST_P(ConnectionInvariants, Homogeneity) {
  const auto m = make_metric(GetParam());
  for (const auto& z : samples(m, 20, 13)) {
    SupportElement z2 = z;
    for (auto& e : z2.v) e *= 2.0;
    const PointGeometry a = compute_point_geometry(m, z, Depth::connection);
    const PointGeometry b = compute_point_geometry(m, z2, Depth::connection);
    for (int i = 0; i < m.dim(); ++i) {
      EXPECT_NEAR(b.spray(i), 4.0 * a.spray(i), 1e-9 * std::max(1.0, std::abs(b.spray(i))));
      for (int j = 0; j < m.dim(); ++j)
        EXPECT_NEAR(b.N(i, j), 2.0 * a.N(i, j), 1e-9 * std::max(1.0, std::abs(b.N(i, j))));
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Metrics, ConnectionInvariants,
                         ::testing::Values(euclidean(2), sphere(2, 1.0), sphere(3, 2.0), sphere_times_flat(2),
                                           randers({0.1, 0.0}), randers_field(), quartic(2), quartic(3, 0.5),
                                           funk(2), funk(3)));

TEST(Connection, RandersBerwaldCartanIdentity) {
  const auto r = make_metric(randers_field());
  for (const auto& z : samples(r, 20, 14)) {
    const PointGeometry pg = compute_point_geometry(r, z, Depth::curvature);
    const TensorBlock n0T = along_v(horizontal_derivative_C(pg), z);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) EXPECT_NEAR(pg.B(i, j, k) - pg.gamma(i, j, k) - n0T(i, j, k), 0.0, 1e-7);
  }
}

TEST(Connection, DomainErrors) {
  const auto f = make_metric(funk(2));
  EXPECT_THROW(metric_tensor(f, {{1.5, 0}, {1, 0}}), DomainError);
  EXPECT_THROW(metric_tensor(f, {{0, 0}, {1e-9, 0}}), DomainError);
  EXPECT_THROW(metric_tensor(f, {{0, 0, 0}, {1, 0, 0}}), DomainError);
}
