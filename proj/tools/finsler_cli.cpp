#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "finsler/geodesic.hpp"
#include "finsler/parallel.hpp"
#include "finsler/report.hpp"
#include "finsler/spec_io.hpp"

namespace {

using finsler::report::Json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;

struct UsageError : finsler::Error {
  using Error::Error;
};

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(flag + ": expected comma-separated numbers, got '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

// "5x5@0.1": nx x ny points with the given spacing, centred at the origin.
finsler::Grid parse_grid(const std::string& text) {
  finsler::Grid g;
  char x = 0, at = 0;
  std::istringstream in(text);
  if (!(in >> g.nx >> x >> g.ny >> at >> g.spacing) || x != 'x' || at != '@' || g.nx < 1 || g.ny < 1 ||
      !(g.spacing > 0.0) || !in.eof())
    throw UsageError("--grid: expected NXxNY@SPACING, e.g. 5x5@0.1");
  return g;
}

// "x1,...,xn;v1,...,vn"
finsler::SupportElement parse_start(const std::string& text) {
  const auto semi = text.find(';');
  if (semi == std::string::npos) throw UsageError("--start: expected 'x1,...,xn;v1,...,vn'");
  return {parse_list(text.substr(0, semi), "--start"), parse_list(text.substr(semi + 1), "--start")};
}

void emit(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << body;
}

int report_error(const std::string& kind, const std::exception& e, const std::string& json_path, int line = -1,
                 const std::string& field = "") {
  Json err{{"kind", kind}, {"message", e.what()}};
  if (line >= 0) err["line"] = line;
  if (!field.empty()) err["field"] = field;
  Json doc{{"schema", finsler::report::kSchema}, {"error", err}};
  std::cerr << "error: " << e.what() << "\n";
  try {
    emit(json_path, doc.dump(2) + "\n");
  } catch (...) {
    std::cout << doc.dump(2) << "\n";
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical Finsler geometry: connections, curvature, k-nullity, geodesics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", finsler::report::kToolVersion);

  int threads = 0;
  std::string spec_path, json_path, csv_path;
  std::string point, vector, k_text = "0", grid_text = "5x5@0.1", start;
  std::uint64_t seed = 0;
  double t_end = 10.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("spec", spec_path, "metric spec file (JSON)")->required();
    sub->add_option("--threads", threads, "worker threads (default: FINSLER_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
  };

  auto* rep = app.add_subcommand("report", "tensors, curvature norms, flag curvature and nullity at one point");
  add_common(rep);
  rep->add_option("--point", point, "x as comma-separated coordinates")->required();
  rep->add_option("--vector", vector, "v as comma-separated components")->required();
  rep->add_option("--k", k_text, "k >= 0");
  rep->add_option("--seed", seed, "seed for sampled flags");
  rep->add_option("--json", json_path, "output path (default stdout)");

  auto* suite = app.add_subcommand("suite", "full invariant and theorem battery");
  add_common(suite);
  suite->add_option("--k", k_text, "comma-separated k values (default 0)");
  suite->add_option("--seed", seed, "random seed (default 0)");
  suite->add_option("--grid", grid_text, "involutivity grid NXxNY@SPACING (default 5x5@0.1)");
  suite->add_option("--json", json_path, "output path (default stdout)");

  auto* trace = app.add_subcommand("trace", "integrate a geodesic and write it as CSV");
  add_common(trace);
  trace->add_option("--start", start, "start element 'x1,...,xn;v1,...,vn'")->required();
  trace->add_option("--t-end", t_end, "final parameter value");
  trace->add_option("--csv", csv_path, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  if (threads <= 0) threads = finsler::default_threads();

  try {
    const finsler::MetricSpec spec = finsler::load_metric_spec(spec_path);
    const finsler::FinslerMetric metric = finsler::make_metric(spec);

    if (*rep) {
      finsler::report::ReportOptions opt;
      opt.z = {parse_list(point, "--point"), parse_list(vector, "--vector")};
      const auto ks = parse_list(k_text, "--k");
      if (ks.size() != 1) throw UsageError("--k: report takes a single value");
      opt.k = ks.front();
      opt.seed = seed;
      const auto r = finsler::report::run_report(metric, opt);
      emit(json_path, r.document.dump(2) + "\n");
      return r.all_pass ? kExitOk : kExitCheckFailed;
    }
    if (*suite) {
      finsler::report::SuiteOptions opt;
      opt.ks = parse_list(k_text, "--k");
      opt.seed = seed;
      opt.grid = parse_grid(grid_text);
      opt.threads = threads;
      const auto r = finsler::report::run_suite(metric, opt);
      emit(json_path, r.document.dump(2) + "\n");
      for (const auto& c : r.checks) {
        const char* tag = c.status == finsler::report::Status::pass   ? "PASS"
                          : c.status == finsler::report::Status::fail ? "FAIL"
                                                                      : "N/A ";
        if (c.status == finsler::report::Status::not_applicable)
          std::fprintf(stderr, "%s  %-44s %s\n", tag, c.name.c_str(), c.details.value("reason", "").c_str());
        else
          std::fprintf(stderr, "%s  %-44s residual=%-12.4g tol=%.1g\n", tag, c.name.c_str(), c.residual, c.tolerance);
      }
      return r.all_pass ? kExitOk : kExitCheckFailed;
    }
    if (*trace) {
      const auto z0 = parse_start(start);
      const auto tr = finsler::integrate_geodesic(metric, z0, t_end, 1e-9);
      std::ostringstream os;
      finsler::write_trajectory_csv(os, tr);
      emit(csv_path, os.str());
      return kExitOk;
    }
  } catch (const finsler::SpecParseError& e) {
    return report_error("spec", e, json_path, e.line(), e.field());
  } catch (const finsler::ParameterError& e) {
    return report_error("parameter", e, json_path, -1, e.field());
  } catch (const finsler::DomainError& e) {
    return report_error("domain", e, json_path);
  } catch (const finsler::PreconditionError& e) {
    return report_error("precondition", e, json_path);
  } catch (const UsageError& e) {
    return report_error("usage", e, json_path);
  } catch (const finsler::Error& e) {
    return report_error("numerical", e, json_path);
  }
  return kExitConfig;
}
