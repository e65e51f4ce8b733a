#include <gtest/gtest.h>

#include <sstream>

#include "qwalk/model.hpp"

using namespace qwalk;

namespace {

const char* kMR0 = R"(# test model
[mu]
1 0 0.15
-1 0 0.30
0 1 0.15
0 -1 0.30
1 1 0.10
[mu0]
1 0 0.5
0 1 0.5
[mu1]
1 0 0.3
-1 0 0.4
0 1 0.3
[mu2]
0 1 0.3
0 -1 0.4
1 0 0.3
)";

WalkModel mr0() {
  std::istringstream in(kMR0);
  auto m = parse_model(in, "m_r0");
  require_valid(m);
  return m;
}

WalkModel with_boundaries(const char* mu1, const char* mu2) {
  std::string text = std::string(kMR0);
  text = text.substr(0, text.find("[mu1]"));
  text += std::string("[mu1]\n") + mu1 + "[mu2]\n" + mu2;
  std::istringstream in(text);
  auto m = parse_model(in);
  require_valid(m);
  return m;
}

}  // namespace

TEST(Model, DriftsMatchHandSums) {
  auto d = drift(mr0());
  EXPECT_NEAR(d.M[0], -0.05, 1e-15);
  EXPECT_NEAR(d.M[1], -0.05, 1e-15);
  EXPECT_NEAR(d.M1vec[0], -0.1, 1e-15);
  EXPECT_NEAR(d.M1vec[1], 0.3, 1e-15);
  EXPECT_NEAR(d.M2vec[0], 0.3, 1e-15);
  EXPECT_NEAR(d.M2vec[1], -0.1, 1e-15);
}

TEST(Model, GeneratingFunctionAtOneIsTotalMass) {
  auto m = mr0();
  for (const auto* jm : {&m.mu, &m.mu0, &m.mu1, &m.mu2}) EXPECT_EQ(jm->gf(1, 1), jm->total());
  EXPECT_EQ(m.mu.total(), 1.0);
}

TEST(Model, ClearedKernelMatchesDefinition) {
  auto m = mr0();
  for (double x : {0.3, 0.9, 1.2})
    for (double y : {0.5, 1.0, 1.7}) EXPECT_NEAR(eval_Q(m, x, y), x * y * (1 - m.mu.gf(x, y)), 1e-15);
}

TEST(Model, FormatParseRoundTrip) {
  auto m = mr0();
  std::istringstream in(format_model(m));
  auto back = parse_model(in);
  EXPECT_EQ(back.mu, m.mu);
  EXPECT_EQ(back.mu0, m.mu0);
  EXPECT_EQ(back.mu1, m.mu1);
  EXPECT_EQ(back.mu2, m.mu2);
}

TEST(Model, RejectsExcessMass) {
  std::string text = kMR0;
  text.replace(text.find("1 1 0.10"), 8, "1 1 0.20");
  std::istringstream in(text);
  try {
    auto m = parse_model(in);
    require_valid(m);
    FAIL() << "accepted a measure of mass 1.1";
  } catch (const ModelError& e) {
    EXPECT_TRUE(e.kind() == ModelError::Kind::MalformedMeasure || e.kind() == ModelError::Kind::AssumptionViolated);
  }
}

// sign conditions evaluated by hand for each model
TEST(Recurrence, SignClasses) {
  EXPECT_EQ(classify_recurrence(mr0()).label, Recurrence::R0);
  // M2 < 0 and M1 M1_2 = -0.005 > M2 M1_1 = -0.015
  auto t1 = with_boundaries("1 0 0.6\n-1 0 0.3\n0 1 0.1\n", "0 1 0.3\n0 -1 0.4\n1 0 0.3\n");
  EXPECT_EQ(classify_recurrence(t1).label, Recurrence::T1);
  EXPECT_EQ(classify_recurrence(t1.transposed()).label, Recurrence::T2);
}

TEST(Recurrence, BothTransientConditionsFlagged) {
  auto m = with_boundaries("1 0 0.6\n-1 0 0.3\n0 1 0.1\n", "0 1 0.6\n0 -1 0.3\n1 0 0.1\n");
  auto rc = classify_recurrence(m);
  EXPECT_EQ(rc.label, Recurrence::T1);
  EXPECT_TRUE(rc.also_T2);
}

TEST(Model, TransposeIsAnInvolution) {
  auto m = mr0();
  auto t = m.transposed().transposed();
  EXPECT_EQ(t.mu, m.mu);
  EXPECT_EQ(t.mu1, m.mu1);
  EXPECT_EQ(t.mu2, m.mu2);
}
