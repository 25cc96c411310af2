#pragma once

// Deterministic JSON reports: single-point reports and the invariant suite.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "finsler/connection.hpp"
#include "finsler/curvature.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/jet_calculus.hpp"
#include "finsler/metric.hpp"
#include "finsler/nullity.hpp"
#include "finsler/oracle.hpp"
#include "finsler/parallel.hpp"
#include "finsler/sampling.hpp"
#include "finsler/spec_io.hpp"
#include "finsler/validation.hpp"

namespace finsler::report {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "finsler-nullity/1";
inline constexpr const char* kToolVersion = "1.0.0";

/// Non-finite values become the strings "inf", "-inf", "nan".
inline Json num(double d) {
  if (std::isnan(d)) return "nan";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  return d;
}

inline Json vec_json(std::span<const double> v) {
  Json a = Json::array();
  for (double e : v) a.push_back(num(e));
  return a;
}

/// Nested arrays, first slot outermost.
inline Json tensor_json(const TensorBlock& t) {
  std::function<Json(int, std::size_t)> rec = [&](int slot, std::size_t offset) -> Json {
    Json a = Json::array();
    const int n = t.dim();
    std::size_t stride = 1;
    for (int s = slot + 1; s < t.rank(); ++s) stride *= static_cast<std::size_t>(n);
    for (int i = 0; i < n; ++i) {
      if (slot + 1 == t.rank())
        a.push_back(num(t.data()[offset + i]));
      else
        a.push_back(rec(slot + 1, offset + i * stride));
    }
    return a;
  };
  if (t.rank() == 0) return Json::array();
  return rec(0, 0);
}

/// Columns of a basis matrix as a list of vectors.
inline Json basis_json(const Eigen::MatrixXd& B) {
  Json a = Json::array();
  for (int c = 0; c < B.cols(); ++c) {
    std::vector<double> col(B.rows());
    for (int r = 0; r < B.rows(); ++r) col[r] = B(r, c);
    a.push_back(vec_json(col));
  }
  return a;
}

inline Json subspace_json(const Subspace& s) {
  return Json{{"dimension", s.dim()},
              {"basis", basis_json(s.basis)},
              {"singular_values", vec_json(s.singular_values)},
              {"threshold", num(s.threshold)},
              {"gap_ratio", num(s.gap_ratio)},
              {"ambiguous", s.ambiguous}};
}

inline Json nullity_json(const NullityReport& r) {
  return Json{{"k", num(r.k)},
              {"mu_k", r.mu_k},
              {"argument_space", subspace_json(r.arg)},
              {"kernel_space", subspace_json(r.ker)},
              {"principal_angle", num(r.principal_angle)},
              {"dims_agree", r.dims_agree},
              {"ambiguous", r.ambiguous},
              {"outside_standing_hypothesis", r.outside_standing_hypothesis}};
}

enum class Status { pass, fail, not_applicable };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::not_applicable: return "not_applicable";
  }
  return "fail";
}

/// One pass/fail line with its numeric residual and the tolerance applied.
struct Check {
  std::string name;
  Status status = Status::pass;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string oracle;
  Json details = Json::object();

  static Check compare(std::string name, double residual, double tolerance, std::string oracle) {
    Check c;
    c.name = std::move(name);
    c.residual = residual;
    c.tolerance = tolerance;
    c.oracle = std::move(oracle);
    c.status = residual < tolerance ? Status::pass : Status::fail;
    return c;
  }
  static Check not_applicable(std::string name, std::string reason) {
    Check c;
    c.name = std::move(name);
    c.status = Status::not_applicable;
    c.details["reason"] = std::move(reason);
    return c;
  }

  Json json() const {
    Json j{{"name", name}, {"status", to_string(status)}};
    if (status != Status::not_applicable) {
      j["residual"] = num(residual);
      j["tolerance"] = num(tolerance);
      j["oracle"] = oracle;
    }
    if (!details.empty()) j["details"] = details;
    return j;
  }
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t id) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (id + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::vector<double> random_flag_vector(Sampler& s, const SupportElement& z, const TensorBlock& g) {
  while (true) {
    auto X = s.direction(z.dim());
    const double gxx = g_inner(g, X, X), gxv = g_inner(g, X, z.v), gvv = g_inner(g, z.v, z.v);
    if (gxx * gvv - gxv * gxv > 1e-3 * gxx * gvv) return X;
  }
}

inline double h_vs_r_residual(const PointGeometry& pg, const CurvatureBundle& cb, std::span<const double> X) {
  const auto a = apply_xvv(cb.R, X, pg.z.v);
  const auto b = apply_xvv(cb.H, X, pg.z.v);
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

// ---------------------------------------------------------------------------
// Single-point report

struct ReportOptions {
  SupportElement z;
  double k = 0.0;
  std::uint64_t seed = 0;
  double rank_tol = kDefaultRankTol;
  int flag_samples = 8;
};

struct ReportResult {
  Json document;
  bool all_pass = true;
};

inline ReportResult run_report(const FinslerMetric& metric, const ReportOptions& opt) {
  require_in_domain(metric, opt.z);
  if (!(opt.k >= 0.0)) throw PreconditionError("k must be non-negative");
  const PointGeometry pg = compute_point_geometry(metric, opt.z, Depth::full);
  const CurvatureBundle cb = curvature_bundle(pg);
  const RelatedOperator op = related_operator(pg, cb.R, opt.k);
  const NullityReport nr = nullity_report(NullityPoint{pg, cb.R, op}, opt.k, opt.rank_tol);

  Json doc;
  doc["schema"] = kSchema;
  doc["command"] = "report";
  doc["metadata"] = Json{{"tool", "finsler"},
                         {"version", kToolVersion},
                         {"metric", spec_to_json(metric.spec())},
                         {"k", num(opt.k)},
                         {"seed", opt.seed},
                         {"rank_tol", num(opt.rank_tol)}};
  doc["point"] = Json{{"x", vec_json(opt.z.x)}, {"v", vec_json(opt.z.v)}, {"F", num(std::sqrt(pg.F2))}};
  doc["connection"] = Json{{"g", tensor_json(pg.g)},
                           {"T", tensor_json(pg.T)},
                           {"spray", tensor_json(pg.spray)},
                           {"nonlinear", tensor_json(pg.N)},
                           {"cartan_h", tensor_json(pg.gamma)},
                           {"berwald", tensor_json(pg.B)}};
  doc["curvature_norms"] = Json{{"R", num(max_abs(cb.R))},
                                {"P", num(max_abs(cb.P))},
                                {"sP", num(max_abs(cb.sP))},
                                {"aP", num(max_abs(cb.aP))},
                                {"Q", num(max_abs(cb.Q))},
                                {"H", num(max_abs(cb.H))},
                                {"nonlinear_curvature", num(max_abs(cb.nonlinear_curv))},
                                {"omega_bar_hh", num(max_abs(op.omega_bar_hh))}};

  Sampler rng(mix_seed(opt.seed, 0));
  Json flags = Json::array();
  double h_vs_r = 0.0, kdiff = 0.0;
  for (int s = 0; s < opt.flag_samples; ++s) {
    const auto X = random_flag_vector(rng, opt.z, pg.g);
    const double KR = flag_curvature(pg, cb.R, X), KH = flag_curvature(pg, cb.H, X);
    h_vs_r = std::max(h_vs_r, h_vs_r_residual(pg, cb, X));
    kdiff = std::max(kdiff, std::abs(KR - KH));
    flags.push_back(Json{{"X", vec_json(X)}, {"K", num(KR)}, {"K_berwald", num(KH)}});
  }
  doc["flag_curvature"] = flags;
  doc["nullity"] = nullity_json(nr);

  const ConnectionResiduals cr = connection_residuals(pg);
  const double sR = tensor_scale(cb.R), sP = tensor_scale(cb.P);
  std::vector<Check> checks = {
      Check::compare("g_inverse", cr.inverse, 1e-10, "identity"),
      Check::compare("cartan_v_contraction", cr.cartan_v_contraction, 1e-9, "euler_homogeneity"),
      Check::compare("spray_euler", cr.spray_euler, 1e-9, "euler_homogeneity"),
      Check::compare("metric_compatibility", cr.metric_compatibility, 1e-8, "identity"),
      Check::compare("berwald_cartan_relation", cr.berwald_cartan, 1e-7 * tensor_scale(pg.B), "identity"),
      Check::compare("H_vs_R_along_v", h_vs_r, 1e-6 * sR, "identity"),
      Check::compare("flag_curvature_R_vs_H", kdiff, 1e-6, "berwald_pipeline"),
      Check::compare("sP_v_contraction", sP_v_residual(cb.sP, pg.z.v), 1e-7 * sP, "identity"),
      Check::compare("P_vs_commutator", max_abs_diff(cb.P, hv_curvature_commutator(pg)), 1e-6 * sP,
                     "commutator_oracle"),
      Check::compare("omega_bar_antisymmetry", antisymmetry_residual(pg.g, op.omega_bar_hh), 1e-7 * tensor_scale(op.omega_bar_hh),
                     "identity"),
      Check::compare("bianchi_first_horizontal", bianchi_residual(pg, cb.R), 1e-5 * sR, "identity"),
  };
  Check t2 = Check::compare("theorem2_coincidence", nr.principal_angle, kTheorem2AngleTol, "argument_vs_kernel");
  if (!nr.dims_agree) t2.status = Status::fail;
  t2.details = Json{{"dim_argument", nr.arg.dim()}, {"dim_kernel", nr.ker.dim()}};
  if (nr.ambiguous) {
    t2.status = Status::not_applicable;
    t2.details["reason"] = "ambiguous rank (gap_ratio < 1e3)";
  }
  checks.push_back(t2);

  ReportResult res;
  Json cj = Json::array();
  for (const auto& c : checks) {
    cj.push_back(c.json());
    if (c.status == Status::fail) res.all_pass = false;
  }
  doc["checks"] = cj;
  doc["all_pass"] = res.all_pass;
  res.document = std::move(doc);
  return res;
}

// ---------------------------------------------------------------------------
// Invariant suite

struct SuiteOptions {
  std::vector<double> ks = {0.0, 0.5, 1.0};
  std::uint64_t seed = 0;
  Grid grid;
  int threads = 1;
  int samples = 16;
  double rank_tol = kDefaultRankTol;
};

struct SuiteResult {
  Json document;
  std::vector<Check> checks;
  bool all_pass = true;
};

namespace detail {

struct SuiteContext {
  const FinslerMetric& metric;
  const SuiteOptions& opt;

  std::vector<SupportElement> samples(std::uint64_t id, int count) const {
    Sampler s(mix_seed(opt.seed, id));
    std::vector<SupportElement> out;
    for (int i = 0; i < count; ++i) out.push_back(s.support(metric));
    return out;
  }
};

inline Check check_validation(const SuiteContext& c) {
  const auto rep = validate_metric(c.metric, c.samples(1, c.opt.samples));
  double hom = 0.0, min_eig = std::numeric_limits<double>::infinity();
  for (const auto& s : rep.samples) {
    hom = std::max(hom, s.homogeneity_residual / std::max(1.0, s.F));
    min_eig = std::min(min_eig, s.min_eig_g);
  }
  Check ch = Check::compare("finsler_structure", hom, rep.tolerance, "homogeneity_and_positive_definiteness");
  if (!rep.pass) ch.status = Status::fail;
  ch.details = Json{{"min_eig_g", num(min_eig)}};
  return ch;
}

inline Check check_jet_vs_fd(const SuiteContext& c) {
  const int n = c.metric.dim();
  const auto idx = multi_indices_up_to(n, 3);
  const SquaredNorm f{&c.metric};
  const auto& space = JetSpace::get(n, 3, 3);
  double worst = 0.0;
  for (const auto& z : c.samples(2, c.opt.samples)) {
    const Jet j = seed_and_evaluate(f, z, space);
    for (const auto& mi : idx) {
      const double a = j.partial(mi.slots(n));
      const double b = finite_difference_partial(f, z, mi, cross_check_step(mi.order()));
      worst = std::max(worst, std::abs(a - b) / (1.0 + std::abs(a)));
    }
  }
  return Check::compare("jet_vs_finite_difference", worst, 1e-5, "finite_difference_richardson");
}

inline Check check_euler(const SuiteContext& c) {
  const int n = c.metric.dim();
  const Norm f{&c.metric};
  const auto& space = JetSpace::get(n, 1, 1);
  double worst = 0.0;
  for (const auto& z : c.samples(3, c.opt.samples)) {
    const Jet j = seed_and_evaluate(f, z, space);
    double s = -j.value();
    for (int q = 0; q < n; ++q) s += z.v[q] * j.partial(std::vector<int>{n + q});
    worst = std::max(worst, std::abs(s) / std::max(1.0, j.value()));
  }
  return Check::compare("euler_homogeneity_F", worst, 1e-10, "identity");
}

inline std::vector<Check> check_connection(const SuiteContext& c) {
  ConnectionResiduals w;
  double hom = 0.0, g_hom = 0.0;
  for (const auto& z : c.samples(4, c.opt.samples)) {
    const PointGeometry pg = compute_point_geometry(c.metric, z, Depth::curvature);
    const ConnectionResiduals r = connection_residuals(pg);
    w.inverse = std::max(w.inverse, r.inverse);
    w.cartan_v_contraction = std::max(w.cartan_v_contraction, r.cartan_v_contraction);
    w.spray_euler = std::max(w.spray_euler, r.spray_euler);
    w.metric_compatibility = std::max(w.metric_compatibility, r.metric_compatibility);
    w.berwald_cartan = std::max(w.berwald_cartan, r.berwald_cartan / tensor_scale(pg.B));
    w.gamma_symmetry = std::max(w.gamma_symmetry, r.gamma_symmetry);
    SupportElement z2 = z;
    for (auto& e : z2.v) e *= 2.0;
    const PointGeometry p2 = compute_point_geometry(c.metric, z2, Depth::connection);
    for (int i = 0; i < pg.n; ++i) {
      hom = std::max(hom, std::abs(p2.spray(i) - 4.0 * pg.spray(i)) / std::max(1.0, std::abs(4.0 * pg.spray(i))));
      for (int j = 0; j < pg.n; ++j) {
        hom = std::max(hom, std::abs(p2.N(i, j) - 2.0 * pg.N(i, j)) / std::max(1.0, std::abs(2.0 * pg.N(i, j))));
        g_hom = std::max(g_hom, std::abs(p2.g(i, j) - pg.g(i, j)));
      }
    }
  }
  return {Check::compare("g_inverse", w.inverse, 1e-10, "identity"),
          Check::compare("cartan_v_contraction", w.cartan_v_contraction, 1e-9, "euler_homogeneity"),
          Check::compare("spray_euler", w.spray_euler, 1e-9, "euler_homogeneity"),
          Check::compare("metric_compatibility", w.metric_compatibility, 1e-8, "identity"),
          Check::compare("cartan_h_symmetry", w.gamma_symmetry, 1e-15, "identity"),
          Check::compare("berwald_cartan_relation", w.berwald_cartan, 1e-7, "identity"),
          Check::compare("spray_homogeneity", hom, 1e-9, "homogeneity"),
          Check::compare("g_zero_homogeneity", g_hom, 1e-9, "homogeneity")};
}

inline Check check_riemannian_reduction(const SuiteContext& c) {
  if (!c.metric.is_riemannian()) return Check::not_applicable("riemannian_reduction", "metric is not Riemannian");
  double pq = 0.0, gam = 0.0, riem = 0.0, gdiff = 0.0;
  for (const auto& z : c.samples(5, c.opt.samples)) {
    const PointGeometry pg = compute_point_geometry(c.metric, z, Depth::curvature);
    pq = std::max({pq, max_abs(hv_curvature_P(pg)), max_abs(vv_curvature_Q(pg)), max_abs(pg.C)});
    const TensorBlock G = oracle::christoffel(c.metric, z.x);
    gam = std::max(gam, max_abs_diff(pg.gamma, G) / tensor_scale(G));
    gam = std::max(gam, max_abs_diff(pg.B, G) / tensor_scale(G));
    const TensorBlock R = oracle::riemann(c.metric, z.x);
    riem = std::max(riem, max_abs_diff(hh_curvature_R(pg), R) / tensor_scale(R));
    const auto a = *c.metric.riemannian_matrix(z.x);
    for (int i = 0; i < pg.n; ++i)
      for (int j = 0; j < pg.n; ++j) gdiff = std::max(gdiff, std::abs(pg.g(i, j) - a[i * pg.n + j]));
  }
  const double worst = std::max({pq / 1e-8, gam / 1e-7, riem / 1e-7, gdiff / 1e-10});
  Check ch = Check::compare("riemannian_reduction", worst, 1.0, "christoffel_riemann_oracle");
  ch.details = Json{{"P_Q_C_max", num(pq)}, {"christoffel_rel", num(gam)}, {"riemann_rel", num(riem)}, {"g_vs_a", num(gdiff)}};
  return ch;
}

inline std::vector<Check> check_curvature(const SuiteContext& c) {
  Sampler rng(mix_seed(c.opt.seed, 6));
  double h_vs_r = 0.0, spv = 0.0, comm = 0.0, bianchi = 0.0, anti = 0.0, kdiff = 0.0, eta_cyc = 0.0, eta_par = 0.0, qv = 0.0;
  double kmin = std::numeric_limits<double>::infinity(), kmax = -kmin, kdev = 0.0;
  const auto known = c.metric.known_flag_curvature();
  for (const auto& z : c.samples(6, c.opt.samples)) {
    const PointGeometry pg = compute_point_geometry(c.metric, z, Depth::full);
    const CurvatureBundle cb = curvature_bundle(pg);
    const double sR = tensor_scale(cb.R), sP = tensor_scale(cb.P);
    for (int s = 0; s < 4; ++s) {
      const auto X = random_flag_vector(rng, z, pg.g);
      h_vs_r = std::max(h_vs_r, h_vs_r_residual(pg, cb, X) / sR);
      const double KR = flag_curvature(pg, cb.R, X), KH = flag_curvature(pg, cb.H, X);
      kdiff = std::max(kdiff, std::abs(KR - KH) / std::max(1.0, std::abs(KR)));
      kmin = std::min(kmin, KR);
      kmax = std::max(kmax, KR);
      if (known) kdev = std::max(kdev, std::abs(KR - *known));
    }
    spv = std::max(spv, sP_v_residual(cb.sP, z.v) / sP);
    comm = std::max(comm, max_abs_diff(cb.P, hv_curvature_commutator(pg)) / sP);
    bianchi = std::max(bianchi, bianchi_residual(pg, cb.R) / sR);
    for (double k : c.opt.ks) {
      const RelatedOperator op = related_operator(pg, cb.R, k);
      anti = std::max(anti, antisymmetry_residual(pg.g, op.omega_bar_hh) / tensor_scale(op.omega_bar_hh));
      eta_cyc = std::max(eta_cyc, cyclic_sum_residual(eta_hh(pg.g, k)));
      eta_par = std::max(eta_par, eta_parallel_residual(pg, k));
    }
    for (int i = 0; i < pg.n; ++i)
      for (int k = 0; k < pg.n; ++k)
        for (int l = 0; l < pg.n; ++l) {
          double s = 0.0;
          for (int j = 0; j < pg.n; ++j) s += cb.Q(i, j, k, l) * z.v[j];
          qv = std::max(qv, std::abs(s));
        }
  }
  std::vector<Check> out = {
      Check::compare("H_vs_R_along_v", h_vs_r, 1e-6, "identity"),
      Check::compare("sP_v_contraction", spv, 1e-7, "identity"),
      Check::compare("P_vs_commutator", comm, 1e-6, "commutator_oracle"),
      Check::compare("Q_v_contraction", qv, 1e-9, "identity"),
      Check::compare("bianchi_first_horizontal", bianchi, 1e-5, "identity"),
      Check::compare("omega_bar_antisymmetry", anti, 1e-7, "identity"),
      Check::compare("eta_cyclic_sum", eta_cyc, 1e-12, "identity"),
      Check::compare("eta_parallel", eta_par, 1e-7, "identity"),
      Check::compare("flag_curvature_R_vs_H", kdiff, 1e-6, "berwald_pipeline"),
  };
  if (known) {
    const double tol = *known == 0.0 ? 1e-10 : (c.metric.family() == Family::funk_disk ? 1e-4 : 1e-6);
    Check ch = Check::compare("flag_curvature_constant", kdev, tol, "space_form_value");
    ch.details = Json{{"expected", num(*known)}, {"min", num(kmin)}, {"max", num(kmax)}};
    out.push_back(ch);
  } else {
    Check ch = Check::not_applicable("flag_curvature_constant", "no known constant flag curvature");
    ch.details["min"] = num(kmin);
    ch.details["max"] = num(kmax);
    out.push_back(ch);
  }
  return out;
}

inline Check check_p_symmetry(const SuiteContext& c) {
  int disagree = 0, sym = 0;
  double rp = 0.0, rq = 0.0;
  const auto zs = c.samples(7, c.opt.samples);
  for (const auto& z : zs) {
    const auto r = p_symmetry_check(c.metric, z, 1e-7);
    disagree += r.agree ? 0 : 1;
    sym += r.p_symmetric ? 1 : 0;
    rp = std::max(rp, r.residual_p / r.scale_p);
    rq = std::max(rq, r.residual_q / r.scale_q);
  }
  Check ch = Check::compare("p_symmetry_agreement", disagree, 1.0, "proposition_two_residuals");
  ch.details = Json{{"samples", zs.size()}, {"p_symmetric_count", sym}, {"max_residual_P", num(rp)}, {"max_residual_nabla_v_Q", num(rq)}};
  return ch;
}

inline std::string kname(const std::string& base, double k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s[k=%g]", base.c_str(), k);
  return buf;
}

inline std::vector<Check> check_nullity(const SuiteContext& c, double k, std::uint64_t id) {
  std::vector<Check> out;
  const auto zs = c.samples(id, std::max(2, c.opt.samples / 4));
  double angle = 0.0;
  int ambiguous = 0, mismatched = 0;
  Json mus = Json::array();
  for (const auto& z : zs) {
    const NullityReport r = nullity_report(c.metric, z, k, c.opt.rank_tol);
    mus.push_back(r.mu_k);
    if (r.ambiguous) {
      ++ambiguous;
      continue;
    }
    if (!r.dims_agree) ++mismatched;
    angle = std::max(angle, r.principal_angle);
  }
  Check t2 = Check::compare(kname("theorem2_coincidence", k), angle, kTheorem2AngleTol, "argument_vs_kernel");
  if (mismatched) t2.status = Status::fail;
  t2.details = Json{{"mu_k", mus}, {"ambiguous_skipped", ambiguous}, {"dimension_mismatches", mismatched}};
  out.push_back(t2);

  // v-consistency of the index at the first sample's base point.
  Sampler rng(mix_seed(c.opt.seed, id + 100));
  std::vector<std::vector<double>> vs;
  for (int i = 0; i < 6; ++i) vs.push_back(rng.direction(c.metric.dim()));
  const NullityIndex ni = nullity_index(c.metric, zs.front().x, k, vs, c.opt.rank_tol);
  Check ix = Check::compare(kname("nullity_index_v_consistency", k), ni.consistent ? 0.0 : 1.0, 0.5,
                            "multi_direction_comparison");
  ix.details = Json{{"mu_k", ni.mu_k}, {"per_v", ni.per_v}, {"max_angle", num(ni.max_angle)}, {"ambiguous", ni.ambiguous}};
  if (!c.metric.is_riemannian()) {
    // v-independence is not established for Finsler metrics: reported, not asserted.
    ix.details["informational"] = true;
    if (ix.status == Status::fail) ix.status = Status::not_applicable;
  }
  out.push_back(ix);
  return out;
}

inline Check check_involutivity(const SuiteContext& c, double k) {
  const std::string name = kname("theorem1_involutivity", k);
  const std::vector<double> center(c.metric.dim(), 0.0);
  try {
    const auto r = involutivity_check(c.metric, center, c.opt.grid, k, 1e-4, std::nullopt, c.opt.rank_tol);
    Check ch = Check::compare(name, r.max_residual, 1e-4, "central_difference_brackets");
    ch.details = Json{{"mu_k", r.mu_k}, {"grid_points", r.grid_points}, {"pairs", r.pairs}};
    return ch;
  } catch (const PreconditionError& e) {
    return Check::not_applicable(name, e.what());
  } catch (const NumericalError& e) {
    return Check::not_applicable(name, e.what());
  } catch (const DomainError& e) {
    return Check::not_applicable(name, e.what());
  }
}

/// A support element whose direction lies in N^k, or nullopt when mu_k = 0.
inline std::optional<SupportElement> leaf_start(const SuiteContext& c, double k, std::uint64_t id) {
  SupportElement z = c.samples(id, 1).front();
  for (int it = 0; it < 3; ++it) {
    const Subspace s = nullity_argument_space(c.metric, z, k, c.opt.rank_tol);
    if (s.dim() == 0 || s.ambiguous) return std::nullopt;
    std::vector<double> v(s.basis.col(0).data(), s.basis.col(0).data() + z.dim());
    z.v = v;
    const Subspace s2 = nullity_argument_space(c.metric, z, k, c.opt.rank_tol);
    const NullityPoint np = nullity_point(c.metric, z, k);
    const Eigen::MatrixXd G = to_eigen(np.pg.g);
    const Eigen::Map<const Eigen::VectorXd> w(z.v.data(), z.dim());
    const Eigen::VectorXd perp = w - s2.basis * (s2.basis.transpose() * (G * w));
    if (std::sqrt(perp.dot(G * perp) / w.dot(G * w)) <= kLeafMembershipTol) return z;
  }
  return std::nullopt;
}

inline std::vector<Check> check_leaves(const SuiteContext& c, double k, std::uint64_t id) {
  std::vector<Check> out;
  const auto z = leaf_start(c, k, id);
  if (!z) {
    const char* why = "mu_k = 0 or no direction inside N^k";
    out.push_back(Check::not_applicable(kname("theorem3_leaf_flag_curvature", k), why));
    out.push_back(Check::not_applicable(kname("theorem3_confinement", k), why));
    out.push_back(Check::not_applicable(kname("theorem4_extendability", k), why));
    return out;
  }
  const LeafFlagResult lf = leaf_flag_curvature_check(c.metric, *z, k, std::nullopt, c.opt.rank_tol);
  if (lf.applicable) {
    Check ch = Check::compare(kname("theorem3_leaf_flag_curvature", k), lf.deviation, kLeafFlagTol, "constant_k");
    ch.details = Json{{"K", num(lf.K)}};
    out.push_back(ch);
  } else {
    out.push_back(Check::not_applicable(kname("theorem3_leaf_flag_curvature", k), "mu_k < 2"));
  }
  const ConfinementResult cr = totally_geodesic_check(c.metric, *z, k, 20.0, false, 1e-10, c.opt.rank_tol, 1);
  Check cc = Check::compare(kname("theorem3_confinement", k), cr.max_deviation, 1e-6, "pointwise_nullity_recomputation");
  cc.details = Json{{"mu_k", cr.mu_k}, {"t_reached", num(cr.t_reached)}};
  if (cr.domain_exit) cc.details["domain_exit"] = num(*cr.domain_exit);
  if (cr.mu_change_t) {
    cc.status = Status::fail;
    cc.details["mu_change_t"] = num(*cr.mu_change_t);
  }
  out.push_back(cc);
  if (!c.metric.declared_complete()) {
    out.push_back(Check::not_applicable(kname("theorem4_extendability", k), "metric not declared complete"));
  } else {
    const ExtendabilityReport er = extendability_probe(c.metric, *z, k, 100.0, 1e-10, c.opt.rank_tol, 1);
    Check ec = Check::compare(kname("theorem4_extendability", k), er.confinement.max_deviation, kExtendConfinementTol,
                              "long_horizon_integration");
    if (!er.pass) ec.status = Status::fail;
    ec.details = Json{{"t_max", num(er.t_max)}, {"energy_drift", num(er.confinement.energy_drift)}};
    out.push_back(ec);
  }
  return out;
}

inline std::vector<Check> check_geodesics(const SuiteContext& c) {
  const auto zs = c.samples(9, 3);
  double drift = 0.0, reparam = 0.0, transport = 0.0;
  bool reparam_done = false;
  for (const auto& z : zs) {
    const Trajectory tr = integrate_geodesic(c.metric, z, 10.0, 1e-9);
    drift = std::max(drift, energy_drift(tr));
    SupportElement z2 = z;
    for (auto& e : z2.v) e *= 2.0;
    const Trajectory t1 = integrate_geodesic(c.metric, z, 2.0, 1e-10);
    const Trajectory t2 = integrate_geodesic(c.metric, z2, 1.0, 1e-10);
    if (!t1.domain_exit && !t2.domain_exit) {
      const auto a = t1.state_at(2.0), b = t2.state_at(1.0);
      for (int i = 0; i < z.dim(); ++i)
        reparam = std::max(reparam, std::abs(a.x[i] - b.x[i]) / (1.0 + std::abs(a.x[i])));
      reparam_done = true;
    }
    const Trajectory ts = integrate_geodesic(c.metric, z, 2.0, 1e-10);
    const std::vector<double> X0(z.dim(), 1.0);
    const auto Xs = parallel_transport(c.metric, ts, X0);
    const auto Vs = parallel_transport(c.metric, ts, z.v);
    const TensorBlock g0 = metric_tensor(c.metric, ts.states.front());
    const double xx0 = g_inner(g0, Xs.front(), Xs.front()), xv0 = g_inner(g0, Xs.front(), Vs.front());
    for (std::size_t i = 0; i < Xs.size(); ++i) {
      const TensorBlock g = metric_tensor(c.metric, ts.states[i]);
      transport = std::max({transport, std::abs(g_inner(g, Xs[i], Xs[i]) - xx0) / std::max(1.0, xx0),
                            std::abs(g_inner(g, Xs[i], Vs[i]) - xv0) / std::max(1.0, std::abs(xx0))});
      for (int q = 0; q < z.dim(); ++q)
        transport = std::max(transport, std::abs(Vs[i][q] - ts.states[i].v[q]) / std::max(1.0, euclidean_norm(ts.states[i].v)));
    }
  }
  std::vector<Check> out = {Check::compare("geodesic_energy_drift", drift, 1e-7, "F_conservation"),
                            Check::compare("parallel_transport_compatibility", transport, 1e-7, "metric_compatibility")};
  if (reparam_done)
    out.push_back(Check::compare("geodesic_reparametrization", reparam, 1e-6, "spray_homogeneity"));
  else
    out.push_back(Check::not_applicable("geodesic_reparametrization", "trajectories left the domain"));
  return out;
}

}  // namespace detail

/// Runs the invariant battery. Checks run in parallel and are merged in a
/// fixed order, so the document depends only on the metric and options.
inline SuiteResult run_suite(const FinslerMetric& metric, const SuiteOptions& opt) {
  for (double k : opt.ks)
    if (!(k >= 0.0)) throw PreconditionError("k must be non-negative");
  const detail::SuiteContext ctx{metric, opt};
  using Task = std::function<std::vector<Check>()>;
  std::vector<Task> tasks = {
      [&] { return std::vector<Check>{detail::check_validation(ctx)}; },
      [&] { return std::vector<Check>{detail::check_jet_vs_fd(ctx)}; },
      [&] { return std::vector<Check>{detail::check_euler(ctx)}; },
      [&] { return detail::check_connection(ctx); },
      [&] { return std::vector<Check>{detail::check_riemannian_reduction(ctx)}; },
      [&] { return detail::check_curvature(ctx); },
      [&] { return std::vector<Check>{detail::check_p_symmetry(ctx)}; },
      [&] { return detail::check_geodesics(ctx); },
  };
  for (std::size_t i = 0; i < opt.ks.size(); ++i) {
    const double k = opt.ks[i];
    const std::uint64_t id = 1000 + 10 * i;
    tasks.push_back([&ctx, k, id] { return detail::check_nullity(ctx, k, id); });
    tasks.push_back([&ctx, k] { return std::vector<Check>{detail::check_involutivity(ctx, k)}; });
    tasks.push_back([&ctx, k, id] { return detail::check_leaves(ctx, k, id + 1); });
  }
  const auto parts = parallel_map(tasks.size(), [&](std::size_t i) { return tasks[i](); }, opt.threads);

  SuiteResult res;
  for (const auto& p : parts)
    for (const auto& c : p) {
      if (c.status == Status::fail) res.all_pass = false;
      res.checks.push_back(c);
    }
  Json doc;
  doc["schema"] = kSchema;
  doc["command"] = "suite";
  Json ks = Json::array();
  for (double k : opt.ks) ks.push_back(num(k));
  doc["metadata"] = Json{{"tool", "finsler"},
                         {"version", kToolVersion},
                         {"metric", spec_to_json(metric.spec())},
                         {"k", ks},
                         {"seed", opt.seed},
                         {"samples", opt.samples},
                         {"grid", Json{{"nx", opt.grid.nx}, {"ny", opt.grid.ny}, {"spacing", num(opt.grid.spacing)}}},
                         {"rank_tol", num(opt.rank_tol)}};
  Json cj = Json::array();
  int passed = 0, failed = 0, na = 0;
  for (const auto& c : res.checks) {
    cj.push_back(c.json());
    (c.status == Status::pass ? passed : c.status == Status::fail ? failed : na)++;
  }
  doc["checks"] = cj;
  doc["summary"] = Json{{"passed", passed}, {"failed", failed}, {"not_applicable", na}, {"all_pass", res.all_pass}};
  res.document = std::move(doc);
  return res;
}

}  // namespace finsler::report
