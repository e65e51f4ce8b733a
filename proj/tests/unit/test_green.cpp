#include <gtest/gtest.h>

#include <sstream>

#include "qwalk/green.hpp"

using namespace qwalk;

namespace {

WalkModel load(const char* file) {
  auto m = load_model(std::string(QWALK_TEST_DATA) + "/" + file);
  require_valid(m);
  return m;
}

// sparse LU on [0,250]^2 (tests/oracles); the [0,150]^2 solve agrees to 2e-13
constexpr double kG11 = 2.595875630977436;
constexpr double kG53 = 0.47462136217508283;
// same solver for B4 on [0,350]^2; [0,250]^2 differs by 1.7e-7
constexpr double kB4Return = 0.7380703362386611;

}  // namespace

TEST(Green, DirectTableMatchesSparseSolve) {
  auto m = load("m_r0.model");
  Geometry g(m);
  GreenOptions o;
  o.method = GreenMethod::Direct;
  auto t = green_table(m, g, {1, 1}, Box{20, 20}, 1e-10, o);
  ASSERT_TRUE(t.certified);
  EXPECT_NEAR(t.value(1, 1), kG11, std::max(t.bound(1, 1), 1e-12));
  EXPECT_NEAR(t.value(5, 3), kG53, std::max(t.bound(5, 3), 1e-12));
  EXPECT_LT(t.bound(5, 3), 1e-9);
}

TEST(Green, IterationMatchesSparseSolve) {
  auto m = load("m_r0.model");
  Geometry g(m);
  auto t = green_table(m, g, {1, 1}, Box{20, 20}, 1e-8);
  EXPECT_NEAR(t.value(1, 1), kG11, std::max(t.bound(1, 1), 1e-12));
  EXPECT_NEAR(t.value(5, 3), kG53, std::max(t.bound(5, 3), 1e-12));
}

TEST(Green, RecurrentReturnIsCertain) {
  auto m = load("m_r0.model");
  Geometry g(m);
  auto h = hitting_prob(m, g, {3, 2}, 1e-10);
  EXPECT_NEAR(h.value, 1.0, h.bound + 1e-12);
}

TEST(Green, TransientReturnProbability) {
  auto m = load("b4.model");
  Geometry g(m);
  auto h = hitting_prob(m, g, {0, 0}, 1e-11);
  EXPECT_NEAR(h.value, kB4Return, h.bound + 1e-6);
  // the column oracle stops at its size cap with a bound of ~0.0102
  EXPECT_LT(h.bound, 0.02);
}

TEST(Green, FunctionalEquationWithinBudget) {
  auto m = load("m_r0.model");
  Geometry g(m);
  double xd = g.critical().x_d, yd = g.critical().y_d;
  std::vector<std::array<double, 2>> pts = {{0.5, 0.5}, {0.6 * xd, 0.15 * yd}, {0.25 * xd, 0.6 * yd}};
  GreenOptions o;
  o.method = GreenMethod::Direct;
  o.dominate = pts;
  o.margin = 100;
  auto t = green_table(m, g, {1, 1}, Box{100, 100}, 1e-10, o);
  ASSERT_TRUE(t.certified);
  for (auto [x, y] : pts) {
    auto r = functional_equation_residual(t, g, x, y);
    EXPECT_LE(r.residual, r.budget) << x << "," << y;
    EXPECT_LT(r.budget, 1e-9) << x << "," << y;
  }
  // a wrong return probability is detected
  auto bad = functional_equation_residual(t, g, 0.5, 0.5, 1e-3);
  EXPECT_GT(bad.residual, bad.budget);
}

TEST(Green, CsvRoundTripIsBitwise) {
  auto m = load("m_r0.model");
  Geometry g(m);
  GreenOptions o;
  o.method = GreenMethod::Direct;
  auto t = green_table(m, g, {2, 1}, Box{12, 9}, 1e-10, o);
  std::stringstream s;
  write_green_csv(s, t);
  auto back = read_green_csv(s);
  ASSERT_EQ(back.values.size(), t.values.size());
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    EXPECT_EQ(back.values[i], t.values[i]);
    EXPECT_EQ(back.tail_bound[i], t.tail_bound[i]);
  }
}

TEST(Green, MonteCarloAgreesAndIsThreadInvariant) {
  auto m = load("m_r0.model");
  auto a = monte_carlo_green(m, {1, 1}, {{1, 1}, {5, 3}}, 200000, 7, 100000, 1);
  auto b = monte_carlo_green(m, {1, 1}, {{1, 1}, {5, 3}}, 200000, 7, 100000, 3);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.stderr_, b.stderr_);
  EXPECT_NEAR(a.mean[0], kG11, 4 * a.stderr_[0]);
  EXPECT_NEAR(a.mean[1], kG53, 4 * a.stderr_[1]);
}

TEST(Certificate, ExistsForEveryReferenceModel) {
  for (const char* f : {"m_r0.model", "b0.model", "b1.model", "b3.model", "b4.model", "b5.model", "b6.model"}) {
    auto m = load(f);
    Geometry g(m);
    auto c = find_certificate(m, g);
    ASSERT_TRUE(c.has_value()) << f;
    EXPECT_LT(c->theta, 1.0) << f;
    EXPECT_LE(certificate_check(m, *c, 40), c->theta * (1 + 1e-12)) << f;
  }
}

TEST(Branches, FirstPassageRepresentation) {
  auto m = load("m_r0.model");
  Geometry g(m);
  for (double x : {0.97, 1.0, 1.1})
    EXPECT_NEAR(y1_probabilistic(m, x, 2000), g.Y1(x), 1e-9);
  EXPECT_NEAR(phi1_branch_probabilistic(m, 1.1, 2000), g.xside().branch_phi(1.1), 1e-6);
}

TEST(Reachability, TestModelReachesTheBox) {
  auto m = load("m_r0.model");
  auto r = reachability(m, Box{10, 10});
  EXPECT_GE(r.N0, 0);
  EXPECT_TRUE(r.box_relative);
}
