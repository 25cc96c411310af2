#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct CliRun {
  int status = -1;
  std::string out;
};

// Runs the CLI through the shell, capturing stdout; stderr is discarded.
CliRun run(const std::string& args) {
  const std::string cmd = std::string(FINSLER_CLI) + " " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string metric(const std::string& name) { return std::string(FINSLER_DATA_DIR) + "/metrics/" + name + ".json"; }

std::vector<std::vector<double>> csv_rows(const std::string& text, std::string* header, std::string* trailer) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      *trailer = line;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST(Cli, ReportEuclidean) {
  const CliRun r = run("report " + metric("euclidean2") + " --point 0,0 --vector 1,0 --k 0");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["schema"], "finsler-nullity/1");
  EXPECT_EQ(j["nullity"]["mu_k"], 2);
  for (const auto& [name, value] : j["curvature_norms"].items()) EXPECT_EQ(value.get<double>(), 0.0) << name;
  for (const auto& c : j["checks"]) {
    EXPECT_TRUE(c.contains("residual"));
    EXPECT_TRUE(c.contains("tolerance"));
  }
}

TEST(Cli, ReportSphereSpaceForm) {
  const CliRun r = run("report " + metric("sphere_r2") + " --point 0.3,-0.1 --vector 0.2,1 --k 0.25");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_LT(j["curvature_norms"]["omega_bar_hh"].get<double>(), 1e-7);
  EXPECT_EQ(j["nullity"]["mu_k"], 2);
}

TEST(Cli, ReportRandersHAlongV) {
  const CliRun r = run("report " + metric("randers") + " --point 0.1,0.2 --vector 0.6,0.8 --k 0");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  bool found = false;
  for (const auto& c : j["checks"])
    if (c["name"] == "H_vs_R_along_v") {
      found = true;
      EXPECT_LT(c["residual"].get<double>(), 1e-6);
      EXPECT_EQ(c["status"], "pass");
    }
  EXPECT_TRUE(found);
}

TEST(Cli, ReportWritesJsonFile) {
  const std::string path = ::testing::TempDir() + "/finsler_report.json";
  const CliRun r = run("report " + metric("funk") + " --point 0.1,0 --vector 0,1 --k 0.5 --json " + path);
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["nullity"]["mu_k"], 0);
}

TEST(Cli, SuiteEuclideanPasses) {
  const CliRun r = run("suite " + metric("euclidean2") + " --k 0,1 --seed 3");
  EXPECT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["schema"], "finsler-nullity/1");
  EXPECT_TRUE(j["summary"]["all_pass"].get<bool>());
  EXPECT_EQ(j["summary"]["failed"], 0);
}

TEST(Cli, SuiteProductPasses) {
  const CliRun r = run("suite " + metric("s2xr") + " --k 0 --grid 3x3@0.1");
  EXPECT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  bool theorem1 = false;
  for (const auto& c : j["checks"]) {
    EXPECT_NE(c["status"], "fail") << c["name"];
    if (c["name"] == "theorem1_involutivity[k=0]") theorem1 = c["status"] == "pass";
  }
  EXPECT_TRUE(theorem1);
}

TEST(Cli, SuiteDeterministic) {
  const CliRun a = run("suite " + metric("randers") + " --k 0,0.5 --seed 7");
  const CliRun b = run("suite " + metric("randers") + " --k 0,0.5 --seed 7 --threads 2");
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  const CliRun c = run("suite " + metric("randers") + " --k 0,0.5 --seed 8");
  EXPECT_NE(a.out, c.out);
}

TEST(Cli, ThreadsFromEnvironment) {
  const CliRun a = run("suite " + metric("euclidean2") + " --seed 1");
  const CliRun b = run("suite " + metric("euclidean2") + " --seed 1 --threads 1");
  const std::string cmd = "FINSLER_THREADS=3 " + std::string(FINSLER_CLI) + " suite " + metric("euclidean2") +
                          " --seed 1 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, got);
  EXPECT_EQ(WEXITSTATUS(pclose(p)), 0);
  EXPECT_EQ(out, a.out);
  EXPECT_EQ(b.out, a.out);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const CliRun bad = run("suite " + std::string(FINSLER_TEST_DATA_DIR) + "/bad_randers.json");
  EXPECT_EQ(bad.status, 2);
  const auto j = nlohmann::json::parse(bad.out);
  EXPECT_EQ(j["schema"], "finsler-nullity/1");
  EXPECT_EQ(j["error"]["kind"], "spec");
  EXPECT_EQ(j["error"]["field"], "b");
  EXPECT_NE(j["error"]["message"].get<std::string>().find("b norm must be < 1"), std::string::npos);

  EXPECT_EQ(run("report " + metric("funk") + " --point 2,0 --vector 1,0").status, 2);
  EXPECT_EQ(nlohmann::json::parse(run("report " + metric("funk") + " --point 2,0 --vector 1,0").out)["error"]["kind"],
            "domain");
  EXPECT_EQ(run("report " + metric("euclidean2") + " --point 0,0 --vector 1,0 --k -1").status, 2);
  EXPECT_EQ(run("suite " + metric("euclidean2") + " --grid 5by5").status, 2);
  EXPECT_EQ(run("suite /nonexistent.json").status, 2);
  EXPECT_EQ(run("trace " + metric("euclidean2") + " --start 0,0").status, 2);
  EXPECT_EQ(run("frobnicate").status, 2);
}

TEST(Cli, TraceEuclideanLine) {
  const CliRun r = run("trace " + metric("euclidean2") + " --start '0,0;0.6,0.8' --t-end 5");
  ASSERT_EQ(r.status, 0);
  std::string header, trailer;
  const auto rows = csv_rows(r.out, &header, &trailer);
  EXPECT_EQ(header, "t,x1,x2,v1,v2,F");
  EXPECT_TRUE(trailer.empty());
  ASSERT_GT(rows.size(), 2u);
  for (const auto& row : rows) {
    ASSERT_EQ(row.size(), 6u);
    EXPECT_NEAR(row[1], 0.6 * row[0], 1e-12);
    EXPECT_NEAR(row[2], 0.8 * row[0], 1e-12);
    EXPECT_NEAR(row[5], 1.0, 1e-14);
  }
  EXPECT_DOUBLE_EQ(rows.back()[0], 5.0);
  // 17 significant digits.
  EXPECT_NE(r.out.find("0.80000000000000004"), std::string::npos);
}

TEST(Cli, TraceFunkDomainExit) {
  const std::string path = ::testing::TempDir() + "/funk_trace.csv";
  const CliRun r = run("trace " + metric("funk") + " --start '0,0;1,0' --t-end 50 --csv " + path);
  ASSERT_EQ(r.status, 0);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string header, trailer;
  csv_rows(ss.str(), &header, &trailer);
  EXPECT_EQ(trailer.rfind("# domain_exit t=", 0), 0u);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(text.rfind('#')), trailer + "\n");
}

TEST(Cli, TraceSphereGreatCircle) {
  const CliRun r = run("trace " + metric("sphere_r1") + " --start '0.5,0;0,0.625' --t-end 6.283185307179586");
  ASSERT_EQ(r.status, 0);
  std::string header, trailer;
  const auto rows = csv_rows(r.out, &header, &trailer);
  ASSERT_GT(rows.size(), 2u);
  for (int q = 1; q < 5; ++q) EXPECT_NEAR(rows.back()[q], rows.front()[q], 1e-5);
}

TEST(Cli, TraceDeterministic) {
  const std::string args = "trace " + metric("randers_field") + " --start '0.1,0;0.5,0.5' --t-end 3";
  EXPECT_EQ(run(args).out, run(args).out);
}
