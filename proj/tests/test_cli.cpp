#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "biortho/cli.hpp"

using namespace biortho;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<double> column(const std::string& csv, std::size_t col) {
  std::vector<double> v;
  const auto ls = lines(csv);
  for (std::size_t i = 1; i < ls.size(); ++i) {
    std::istringstream row(ls[i]);
    std::string cell;
    for (std::size_t c = 0; c <= col; ++c) std::getline(row, cell, ',');
    v.push_back(std::stod(cell));
  }
  return v;
}

std::string temp_file(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p.string();
}

}  // namespace

TEST(Cli, KernelGridWithCrossCheck) {
  const CliRun r = run({"kernel", "--ensemble", "chgue", "--alpha", "1", "--a", "0.3,1.1", "--grid", "0.5:4:17",
                     "--cross-check"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 290u);
  EXPECT_EQ(ls[0], "x,y,K");
  EXPECT_NE(r.err.find("PASS"), std::string::npos);
  const std::vector<double> k = column(r.out, 2);
  EXPECT_NEAR(k[0], chgue_kernel(ChgueParams{1.0, {0.3, 1.1}}, 0.5, 0.5), 1e-15);
}

TEST(Cli, SinglePointGrid) {
  const CliRun r = run({"kernel", "--grid", "1.5:1.5:1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out).size(), 2u);
  EXPECT_EQ(run({"kernel", "--grid", "1:2:0"}).code, 2);
}

TEST(Cli, PolyTypeTwoLaguerreLimit) {
  const CliRun r = run({"poly", "--kind", "II", "--alpha", "0", "--a", "0,0,0", "--grid", "0:10:11"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::vector<double> x = column(r.out, 0), p = column(r.out, 1);
  ASSERT_EQ(x.size(), 11u);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(p[i], -6.0 * laguerre(3, 0.0, x[i]), 1e-10);
}

TEST(Cli, PolyTypeOneSelfTest) {
  const CliRun r = run({"poly", "--kind", "I", "--a", "0.2,0.7,1.3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.err.find("self-test: final moment");
  ASSERT_NE(pos, std::string::npos);
  const double m = std::stod(r.err.substr(r.err.find('=', pos) + 1));
  EXPECT_NEAR(m, 1.0, 1e-8);
}

TEST(Cli, PolyGenericLaguerre) {
  const CliRun r = run({"poly", "--ensemble", "laguerre", "--alpha", "1", "--n", "3", "--grid", "0:5:6"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::vector<double> x = column(r.out, 0), p = column(r.out, 1);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(p[i], -6.0 * laguerre(3, 1.0, x[i]), 1e-8);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({"poly", "--a", ""}).code, 2);
  EXPECT_EQ(run({"kernel", "--a", "0.3,-1"}).code, 2);
  EXPECT_EQ(run({"kernel", "--format", "xml"}).code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"poly", "--kind", "III"}).code, 2);
  EXPECT_EQ(run({"verify", "--suite", "gram", "--tol-override", "nokey"}).code, 2);
}

TEST(Cli, CorrPoints) {
  const CliRun r = run({"corr", "--points", "0.6,1.9"});
  ASSERT_EQ(r.code, 0) << r.err;
  const ChgueParams p{1.0, {0.3, 1.1}};
  const double expect = chgue_kernel(p, 0.6, 0.6) * chgue_kernel(p, 1.9, 1.9) -
                        chgue_kernel(p, 0.6, 1.9) * chgue_kernel(p, 1.9, 0.6);
  EXPECT_NEAR(column(r.out, 1)[0], expect, 1e-9);
}

TEST(Cli, VerifySuitesPass) {
  for (const char* suite : {"gram", "kernel", "ortho", "corollary"}) {
    const CliRun r = run({"verify", "--suite", suite, "--a", "1.3,0.4"});
    EXPECT_EQ(r.code, 0) << suite << "\n" << r.out << r.err;
    EXPECT_EQ(lines(r.out)[0], "check,residual,tolerance,status");
  }
  const CliRun rd = run({"verify", "--suite", "rankdecomp", "--a", "0.9,0,0"});
  EXPECT_EQ(rd.code, 0) << rd.out << rd.err;
}

TEST(Cli, VerifyMonteCarlo) {
  const CliRun r = run({"verify", "--suite", "mc", "--samples", "100000", "--seed", "7"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
}

TEST(Cli, VerifyFailureExitCode) {
  const CliRun r = run({"verify", "--suite", "kernel", "--tol-override", "kernel=0"});
  EXPECT_EQ(r.code, 1) << r.out << r.err;
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, SampleIsDeterministic) {
  const std::vector<std::string> args{"sample", "--samples", "5", "--seed", "3"};
  const CliRun a = run(args), b = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(lines(a.out).size(), 6u);
  auto w1 = args, w4 = args;
  w1.insert(w1.end(), {"--workers", "1"});
  w4.insert(w4.end(), {"--workers", "4"});
  EXPECT_EQ(run(w1).out, run(w4).out);
  EXPECT_NE(run({"sample", "--samples", "5", "--seed", "4"}).out, a.out);
}

TEST(Cli, JsonSchema) {
  const CliRun r = run({"kernel", "--grid", "0.5:1:2", "--format", "json", "--seed", "9"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  for (const char* key : {"params", "grid", "values", "metadata"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["grid"].size(), 2u);
  EXPECT_EQ(j["values"].size(), 2u);
  EXPECT_EQ(j["metadata"]["seed"], 9);
  EXPECT_TRUE(j["metadata"].contains("versions"));
  EXPECT_TRUE(j["metadata"].contains("timestamp"));
  EXPECT_EQ(j["params"]["alpha"], 1.0);
}

TEST(Cli, ConfigFileFlagsWin) {
  const std::string cfg = temp_file("biortho_cfg.json", R"({"alpha": 2, "a": [0.5, 1.5], "grid": "1:2:2"})");
  const CliRun from_cfg = run({"kernel", "--config", cfg});
  ASSERT_EQ(from_cfg.code, 0) << from_cfg.err;
  EXPECT_NEAR(column(from_cfg.out, 2)[0], chgue_kernel(ChgueParams{2.0, {0.5, 1.5}}, 1.0, 1.0), 1e-14);
  const CliRun flagged = run({"kernel", "--config", cfg, "--alpha", "0"});
  ASSERT_EQ(flagged.code, 0) << flagged.err;
  EXPECT_NEAR(column(flagged.out, 2)[0], chgue_kernel(ChgueParams{0.0, {0.5, 1.5}}, 1.0, 1.0), 1e-14);
  const std::string bad = temp_file("biortho_bad.json", R"({"colour": 1})");
  EXPECT_EQ(run({"kernel", "--config", bad}).code, 2);
  std::filesystem::remove(cfg);
  std::filesystem::remove(bad);
}

TEST(Cli, CustomWeights) {
  const std::string w = temp_file("biortho_w.json", R"({"interval": "half_line",
    "weights": [{"power": 0, "poly": [0, 1]}, {"power": 0.5, "poly": [0, 1]}], "n": [2, 1]})");
  const CliRun r = run({"poly", "--ensemble", "custom:" + w, "--kind", "I", "--grid", "0:3:4"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("self-test"), std::string::npos);
  const CliRun k = run({"kernel", "--ensemble", "custom:" + w, "--grid", "0.5:2:3", "--cross-check"});
  EXPECT_EQ(k.code, 0) << k.err;
  std::filesystem::remove(w);
}

TEST(Cli, OutputFile) {
  const auto p = (std::filesystem::temp_directory_path() / "biortho_out.csv").string();
  const CliRun r = run({"corr", "--grid", "1:2:2", "--out", p});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(p);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "x,rho_1");
  std::filesystem::remove(p);
}
