#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "finsler/connection.hpp"
#include "finsler/errors.hpp"
#include "finsler/metric.hpp"

namespace finsler {

struct SampleValidation {
  SupportElement z;
  double F = 0.0;
  double homogeneity_residual = 0.0;  // |F(x, 2v) - 2 F(x, v)|
  double min_eig_g = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<SampleValidation> samples;
  double tolerance = 1e-9;
  bool pass = true;
};

/// Checks positivity, 1-homogeneity and positive definiteness of g at each sample.
inline ValidationReport validate_metric(const FinslerMetric& metric, const std::vector<SupportElement>& samples,
                                        double tol = 1e-9) {
  if (samples.empty()) throw PreconditionError("validate_metric: empty sample list");
  ValidationReport rep;
  rep.tolerance = tol;
  const int n = metric.dim();
  for (const auto& z : samples) {
    require_in_domain(metric, z);
    SampleValidation s;
    s.z = z;
    s.F = metric.F(z);
    std::vector<double> v2(z.v);
    for (auto& e : v2) e *= 2.0;
    s.homogeneity_residual = std::abs(metric.F(z.x, v2) - 2.0 * s.F);
    const PointGeometry pg = compute_point_geometry(metric, z, Depth::spray);
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = pg.g(i, j);
    s.min_eig_g = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    s.pass = s.F > 0.0 && s.homogeneity_residual < tol * std::max(1.0, s.F) && s.min_eig_g > 0.0;
    rep.pass = rep.pass && s.pass;
    rep.samples.push_back(std::move(s));
  }
  return rep;
}

}  // namespace finsler
