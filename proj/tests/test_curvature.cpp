#include <gtest/gtest.h>

#include <cmath>

#include "finsler/curvature.hpp"
#include "finsler/oracle.hpp"
#include "test_support.hpp"

using namespace finsler;
using namespace finsler::testing;

namespace {

PointGeometry full(const FinslerMetric& m, const SupportElement& z) {
  return compute_point_geometry(m, z, Depth::full);
}

std::vector<double> h_vs_r_diff(const CurvatureBundle& cb, const std::vector<double>& X, const std::vector<double>& v) {
  auto h = apply_xvv(cb.H, X, v);
  const auto r = apply_xvv(cb.R, X, v);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] -= r[i];
  return h;
}

}  // namespace

TEST(CurvatureR, EuclideanZero) {
  const auto e = make_metric(euclidean(3));
  const CurvatureBundle cb = curvature_bundle(e, {{0.1, 0.2, 0.3}, {1, -1, 0.5}});
  EXPECT_EQ(max_abs(cb.R), 0.0);
  EXPECT_EQ(max_abs(cb.P), 0.0);
  EXPECT_EQ(max_abs(cb.Q), 0.0);
  EXPECT_EQ(max_abs(cb.H), 0.0);
  EXPECT_EQ(max_abs(cb.nonlinear_curv), 0.0);
}

TEST(CurvatureR, SphereMatchesRiemannOracle) {
  const auto s = make_metric(sphere(2, 1.0));
  Sampler smp(20);
  for (const auto& z : samples(s, 10, 21)) {
    const PointGeometry pg = compute_point_geometry(s, z, Depth::curvature);
    const TensorBlock R = hh_curvature_R(pg);
    EXPECT_LT(max_abs_diff(R, oracle::riemann(s, z.x)), 1e-7 * tensor_scale(R));
    EXPECT_NEAR(flag_curvature(pg, R, smp.direction(2)), 1.0, 1e-10);
  }
}

TEST(CurvatureR, RandersAntisymmetry) {
  const auto r = make_metric(randers_field());
  for (const auto& z : samples(r, 20, 22)) {
    const PointGeometry pg = compute_point_geometry(r, z, Depth::curvature);
    const TensorBlock R = hh_curvature_R(pg);
    EXPECT_LT(antisymmetry_residual(pg.g, R), 1e-7 * tensor_scale(R));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          for (int l = 0; l < 2; ++l) EXPECT_DOUBLE_EQ(R(i, j, k, l), -R(i, j, l, k));
  }
}

TEST(CurvatureP, RiemannianZeroAndSplit) {
  for (const auto& spec : {sphere(2, 1.0), sphere_times_flat(1)}) {
    const auto m = make_metric(spec);
    for (const auto& z : samples(m, 5, 23)) {
      const CurvatureBundle cb = curvature_bundle(m, z);
      EXPECT_EQ(max_abs(cb.P), 0.0);
      EXPECT_EQ(max_abs(cb.Q), 0.0);
    }
  }
  const auto q = make_metric(quartic(3, 0.5));
  for (const auto& z : samples(q, 10, 24)) {
    const CurvatureBundle cb = curvature_bundle(q, z);
    for (std::size_t a = 0; a < cb.P.size(); ++a) EXPECT_EQ(cb.P.data()[a], cb.sP.data()[a] + cb.aP.data()[a]);
  }
}

class NonRiemannian : public ::testing::TestWithParam<MetricSpec> {};

TEST_P(NonRiemannian, SymmetricPKillsV) {
  const auto m = make_metric(GetParam());
  for (const auto& z : samples(m, 30, 25)) {
    const CurvatureBundle cb = curvature_bundle(m, z);
    EXPECT_LT(sP_v_residual(cb.sP, z.v), 1e-7 * tensor_scale(cb.P));
  }
}

TEST_P(NonRiemannian, QContractionWithV) {
  const auto m = make_metric(GetParam());
  const int n = m.dim();
  for (const auto& z : samples(m, 30, 26)) {
    const CurvatureBundle cb = curvature_bundle(m, z);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += cb.Q(i, j, k, l) * z.v[j];
          EXPECT_NEAR(s, 0.0, 1e-9 * tensor_scale(cb.Q));
        }
  }
}

TEST_P(NonRiemannian, PMatchesCommutatorOracle) {
  const auto m = make_metric(GetParam());
  for (const auto& z : samples(m, 30, 27)) {
    const PointGeometry pg = compute_point_geometry(m, z, Depth::curvature);
    const TensorBlock P = hv_curvature_P(pg);
    EXPECT_LT(max_abs_diff(P, hv_curvature_commutator(pg)), 1e-6 * tensor_scale(P));
  }
}

TEST_P(NonRiemannian, HAlongVMatchesR) {
  const auto m = make_metric(GetParam());
  Sampler s(28);
  for (const auto& z : samples(m, 30, 29)) {
    const CurvatureBundle cb = curvature_bundle(m, z);
    for (int t = 0; t < 20; ++t) {
      const auto X = s.direction(m.dim());
      EXPECT_LT(max_abs(h_vs_r_diff(cb, X, z.v)), 1e-6 * tensor_scale(cb.R));
    }
  }
}

TEST_P(NonRiemannian, Bianchi) {
  const auto m = make_metric(GetParam());
  for (const auto& z : samples(m, 20, 30)) {
    const PointGeometry pg = compute_point_geometry(m, z, Depth::curvature);
    const TensorBlock R = hh_curvature_R(pg);
    EXPECT_LT(bianchi_residual(pg, R), 1e-5 * tensor_scale(R));
  }
}

INSTANTIATE_TEST_SUITE_P(Metrics, NonRiemannian,
                         ::testing::Values(randers({0.1, 0.0}), randers_field(), quartic(2), quartic(3, 0.5),
                                           funk(2), funk(3)));

TEST(CurvatureQ, MatchesVerticalFormula) {
  // Q^i_jkl = C^i_rl C^r_jk - C^i_rk C^r_jl, checked independently here.
  const auto q = make_metric(quartic(3, 0.5));
  for (const auto& z : samples(q, 5, 31)) {
    const PointGeometry pg = compute_point_geometry(q, z, Depth::curvature);
    const TensorBlock Q = vv_curvature_Q(pg);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) {
            double s = 0.0;
            for (int r = 0; r < 3; ++r) s += pg.C(i, r, l) * pg.C(r, j, k) - pg.C(i, r, k) * pg.C(r, j, l);
            EXPECT_NEAR(Q(i, j, k, l), s, 1e-12 * tensor_scale(Q));
            EXPECT_DOUBLE_EQ(Q(i, j, k, l), -Q(i, j, l, k));
          }
    EXPECT_LT(antisymmetry_residual(pg.g, Q), 1e-9 * tensor_scale(Q));
  }
}

TEST(CurvatureH, SphereHAlongVMatchesR) {
  const auto s = make_metric(sphere(3, 2.0));
  Sampler smp(32);
  for (const auto& z : samples(s, 10, 33)) {
    const CurvatureBundle cb = curvature_bundle(s, z);
    EXPECT_LT(max_abs(h_vs_r_diff(cb, smp.direction(3), z.v)), 1e-7 * tensor_scale(cb.R));
  }
}

TEST(CurvatureH, RequiresFullDepth) {
  const auto r = make_metric(randers({0.1, 0.0}));
  const PointGeometry pg = compute_point_geometry(r, {{0, 0}, {1, 0}}, Depth::curvature);
  EXPECT_THROW(berwald_hh_curvature_H(pg), PreconditionError);
}

TEST(FlagCurvature, Examples) {
  Sampler s(34);
  const auto e = make_metric(euclidean(3));
  for (const auto& z : samples(e, 10, 35)) EXPECT_EQ(flag_curvature(e, z, s.direction(3)), 0.0);

  const auto sp = make_metric(sphere(2, 2.0));
  for (const auto& z : samples(sp, 20, 36)) EXPECT_NEAR(flag_curvature(sp, z, s.direction(2)), 0.25, 1e-6);

  for (const auto& spec : {funk(2), funk(3)}) {
    const auto f = make_metric(spec);
    for (const auto& z : samples(f, 50, 37)) {
      const PointGeometry pg = full(f, z);
      const auto X = s.direction(f.dim());
      EXPECT_NEAR(flag_curvature(pg, hh_curvature_R(pg), X), -0.25, 1e-4);
      EXPECT_NEAR(flag_curvature(pg, berwald_hh_curvature_H(pg), X), -0.25, 1e-4);
    }
  }
}

TEST(FlagCurvature, ConstantOverFlagsAtFixedPoint) {
  Sampler s(38);
  for (const auto& spec : {euclidean(2), sphere(3, 1.0), funk(3)}) {
    const auto m = make_metric(spec);
    const auto z = samples(m, 1, 39).front();
    const PointGeometry pg = compute_point_geometry(m, z, Depth::curvature);
    const TensorBlock R = hh_curvature_R(pg);
    double sum = 0.0, sum2 = 0.0;
    for (int t = 0; t < 50; ++t) {
      const double K = flag_curvature(pg, R, s.direction(m.dim()));
      sum += K;
      sum2 += K * K;
    }
    const double mean = sum / 50;
    EXPECT_LT(std::sqrt(std::max(0.0, sum2 / 50 - mean * mean)), 1e-5);
  }
}

TEST(FlagCurvature, DegenerateFlag) {
  const auto s = make_metric(sphere(2, 1.0));
  const SupportElement z{{0.1, 0.2}, {0.3, 0.4}};
  EXPECT_THROW(flag_curvature(s, z, std::vector<double>{0.6, 0.8}), NumericalError);
}

TEST(RelatedOperator, Examples) {
  const auto e = make_metric(euclidean(3));
  const SupportElement z{{0, 0, 0}, {1, 0, 0}};
  const RelatedOperator op0 = related_operator(e, z, 0.0);
  EXPECT_EQ(max_abs(op0.omega_bar_hh), 0.0);
  EXPECT_EQ(max_abs(op0.omega_bar_hv), 0.0);

  const auto s = make_metric(sphere(2, 1.0));
  for (const auto& zs : samples(s, 10, 40))
    EXPECT_LT(max_abs(related_operator(s, zs, 1.0).omega_bar_hh), 1e-7);

  // Euclidean, k = 1: Omega-bar = -eta^1 with the sign fixed by the space-form
  // requirement above (Omega-bar of the unit sphere vanishes at k = 1).
  const RelatedOperator op1 = related_operator(e, z, 1.0);
  EXPECT_GT(max_abs(op1.omega_bar_hh), 0.5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          const double expected = (j == k && i == l ? 1.0 : 0.0) - (j == l && i == k ? 1.0 : 0.0);
          EXPECT_EQ(op1.omega_bar_hh(i, j, k, l), expected);
        }

  EXPECT_THROW(related_operator(e, z, -0.1), PreconditionError);
}

class Battery : public ::testing::TestWithParam<MetricSpec> {};

TEST_P(Battery, OmegaBarAntisymmetryAndEta) {
  const auto m = make_metric(GetParam());
  for (const auto& z : samples(m, 20, 41)) {
    const PointGeometry pg = compute_point_geometry(m, z, Depth::curvature);
    const TensorBlock R = hh_curvature_R(pg);
    for (double k : {0.0, 0.5, 1.0}) {
      const RelatedOperator op = related_operator(pg, R, k);
      EXPECT_LT(antisymmetry_residual(pg.g, op.omega_bar_hh), 1e-7 * tensor_scale(op.omega_bar_hh));
      const TensorBlock eta = eta_hh(pg.g, k);
      EXPECT_LT(cyclic_sum_residual(eta), 1e-14 * std::max(1.0, max_abs(eta)));
      EXPECT_LT(eta_parallel_residual(pg, k), 1e-7 * std::max(1.0, max_abs(eta)));
    }
  }
}

TEST_P(Battery, BianchiResidual) {
  const auto m = make_metric(GetParam());
  for (const auto& z : samples(m, 10, 42)) EXPECT_LT(bianchi_residual(m, z), 1e-5 * std::max(1.0, max_abs(curvature_bundle(m, z).R)));
}

INSTANTIATE_TEST_SUITE_P(Metrics, Battery,
                         ::testing::Values(euclidean(2), sphere(2, 1.0), sphere(3, 2.0), sphere_times_flat(1),
                                           sphere_times_flat(2), randers({0.1, 0.0}), randers_field(), quartic(2),
                                           funk(2)));

TEST(Riemannian, ReductionAgainstOracles) {
  for (const auto& spec : {sphere(2, 1.0), sphere(2, 2.0), sphere(3, 1.0), sphere_times_flat(1), sphere_times_flat(2)}) {
    const auto m = make_metric(spec);
    for (const auto& z : samples(m, 10, 43)) {
      const PointGeometry pg = compute_point_geometry(m, z, Depth::curvature);
      const TensorBlock R = hh_curvature_R(pg);
      EXPECT_LT(max_abs(hv_curvature_P(pg)), 1e-8);
      EXPECT_LT(max_abs(vv_curvature_Q(pg)), 1e-8);
      EXPECT_LT(max_abs_diff(pg.gamma, oracle::christoffel(m, z.x)), 1e-7);
      EXPECT_LT(max_abs_diff(related_operator(pg, R, 0.0).omega_bar_hh, oracle::riemann(m, z.x)), 1e-7);
      EXPECT_LT(cyclic_sum_residual(R), 1e-7 * tensor_scale(R));
    }
  }
}
