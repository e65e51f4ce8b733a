#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <sys/wait.h>

#include "qwalk/geometry.hpp"
#include "qwalk/green.hpp"
#include "qwalk/numeric.hpp"

using namespace qwalk;
namespace fs = std::filesystem;

namespace {

struct Run {
  std::string out;
  int code = -1;
};

Run qwalk_cli(const std::string& args) {
  std::string cmd = std::string(QWALK_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  std::array<char, 4096> buf;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string data(const char* f) { return std::string(QWALK_TEST_DATA) + "/" + f; }

}  // namespace

TEST(Cli, ClassifyMatchesLibrary) {
  auto m = load_model(data("m_r0.model"));
  require_valid(m);
  Geometry g(m);
  auto r = qwalk_cli("classify " + data("m_r0.model"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(std::string("region ") + region_name(g.region().region) + "\n"), std::string::npos);
  EXPECT_NE(r.out.find(std::string("recurrence ") + recurrence_name(classify_recurrence(m).label)),
            std::string::npos);
}

TEST(Cli, CriticalAgreesToPrintedDigits) {
  auto m = load_model(data("m_r0.model"));
  require_valid(m);
  Geometry g(m);
  auto r = qwalk_cli("critical " + data("m_r0.model"));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("x_d          " + fmt_short(g.critical().x_d)), std::string::npos) << r.out;
}

TEST(Cli, GreenCsvReloadsBitwise) {
  fs::path f = fs::temp_directory_path() / "qwalk_cli_green.csv";
  auto r = qwalk_cli("green " + data("m_r0.model") + " --j 1,1 --box 15,12 --tol 1e-10 --out " + f.string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream in(f);
  auto back = read_green_csv(in);
  auto m = load_model(data("m_r0.model"));
  require_valid(m);
  Geometry g(m);
  GreenOptions o;
  o.method = GreenMethod::Direct;
  auto t = green_table(m, g, {1, 1}, Box{15, 12}, 1e-10, o);
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.tail_bound, t.tail_bound);
  fs::remove(f);
}

TEST(Cli, B7CheckIsClassificationOnly) {
  auto r = qwalk_cli("check " + data("b7.model"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("region B7 unsupported for asymptotics"), std::string::npos) << r.out;
}

TEST(Cli, ExitCodes) {
  fs::path f = fs::temp_directory_path() / "qwalk_cli_bad.model";
  std::ofstream(f) << "[mu]\n1 0 0.5\n-1 0 0.6\n0 1 0.1\n0 -1 0.1\n[mu0]\n1 0 1\n[mu1]\n1 0 1\n[mu2]\n0 1 1\n";
  EXPECT_EQ(qwalk_cli("validate " + f.string()).code, 1);
  EXPECT_EQ(qwalk_cli("classify " + f.string()).code, 1);
  EXPECT_NE(qwalk_cli("green").code, 0);
  EXPECT_NE(qwalk_cli("frobnicate " + data("m_r0.model")).code, 0);
  EXPECT_NE(qwalk_cli("green " + data("m_r0.model") + " --box 3").code, 0);
  fs::remove(f);
}
