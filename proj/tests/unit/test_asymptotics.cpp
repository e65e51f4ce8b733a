#include <gtest/gtest.h>

#include "qwalk/asymptotics.hpp"

using namespace qwalk;

namespace {

WalkModel load(const char* file) {
  auto m = load_model(std::string(QWALK_TEST_DATA) + "/" + file);
  require_valid(m);
  return m;
}

}  // namespace

// 50-digit series division with the common root deflated (tests/oracles)
TEST(Nu1, MatchesHighPrecisionSeries) {
  auto m = load("m_r0.model");
  Geometry g(m);
  const std::pair<int, double> ref[] = {
      {0, 1.0}, {1, 1.0213085994706631}, {2, 0.94261279816635715}, {5, 0.74107534007327171}, {30, 0.09983226969642276}};
  auto a = nu1_series(m, g, 30);
  auto b = nu1_twisted(m, g, 30);
  for (auto [n, v] : ref) {
    EXPECT_NEAR(a.coeffs[n], v, 1e-12 * v) << n;
    EXPECT_NEAR(b.coeffs[n], v, 1e-12 * v) << n;
  }
  EXPECT_LT(nu1_balance_residual(m, g, a), 1e-10);
}

// L_0 + (phi2 - 1) H_0(0, Y1(x_d)) from a sparse LU on [0,250]^2
TEST(Kappa, TestModelKappa1AtOrigin) {
  auto m = load("m_r0.model");
  Geometry g(m);
  auto o = kappa_oracle(m, g, KappaKind::Kappa1, Box{3, 3});
  auto k = kappa1(m, g, o);
  EXPECT_NEAR(k.value(0, 0), 0.47596697789001297, k.err(0, 0) + 1e-10);
  EXPECT_LT(k.err(0, 0), 2e-8);
}

// at (x_d, Y1(x_d)) = (1,1) kappa1(0) is the escape probability
TEST(Kappa, TransientKappaIsEscapeProbability) {
  auto m = load("b4.model");
  Geometry g(m);
  auto p = kappa_point(g, KappaKind::Kappa1);
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_NEAR(p[1], 1.0, 1e-12);
  auto o = kappa_oracle(m, g, KappaKind::Kappa1, Box{3, 3});
  auto k = kappa1(m, g, o);
  EXPECT_NEAR(k.value(0, 0), 1 - 0.7380703362386611, k.err(0, 0) + 1e-6);
}

TEST(Kappa, HarmonicOnSmallBox) {
  auto m = load("b0.model");
  Geometry g(m);
  auto o = kappa_oracle(m, g, KappaKind::Kappa1, Box{7, 7});
  auto k = kappa1(m, g, o);
  auto E0 = reachability(m, Box{7, 7}).E0;
  auto h = check_harmonic(m, k, Box{6, 6}, E0);
  EXPECT_TRUE(h.within_bound);
  EXPECT_TRUE(h.positive);
}

TEST(Kappa, UndefinedKindThrows) {
  auto m = load("b4.model");
  Geometry g(m);
  try {
    kappa_point(g, KappaKind::Kappa2);
    FAIL() << "kappa2 is not defined in B4";
  } catch (const AsymptoticsError& e) {
    EXPECT_EQ(e.kind(), AsymptoticsError::Kind::UndefinedInRegion);
  }
}

TEST(Constants, CornerFactorAgainstFiniteDifference) {
  auto m = load("m_r0.model");
  Geometry g(m);
  auto bd = branch_chain_derivatives(m, g);
  double xp = g.critical().xP_star2;
  // Y1(x**_P) - Y1(x) ~ cx sqrt(x**_P - x)
  for (double h : {1e-6, 1e-8}) EXPECT_NEAR((g.Y1(xp) - g.Y1(xp - h)) / std::sqrt(h), bd.corner_cx, 2e-3 * bd.corner_cx);
}

TEST(Predictions, SingularAndUnsupported) {
  auto m = load("m_r0.model");
  Geometry g(m);
  AsymptoticContext ctx;
  double u = g.partition().u_low;
  Site k{int(std::lround(1000 * u)), int(std::lround(1000 * std::sqrt(1 - u * u)))};
  // the rounded point is off the edge by more than the angle tolerance, the edge itself is refused
  EXPECT_NE(g.classify_direction(k[0], k[1]), DirectionClass::Singular);
  EXPECT_EQ(g.classify_direction(u, std::sqrt(1 - u * u)), DirectionClass::Singular);

  auto m7 = load("b7.model");
  Geometry g7(m7);
  EXPECT_THROW(build_context(m7, g7), std::exception);
}

TEST(Predictions, AxisPredictionOnBoundaryModel) {
  auto m = load("b0.model");
  Geometry g(m);
  auto ctx = build_context(m, g, {.j_side = 2, .with_tilde = false});
  auto p = predict_axis(g, ctx, {0, 0}, 60, 0);
  EXPECT_EQ(p.regime, Regime::AxisSimplePole);
  GreenOptions o;
  o.method = GreenMethod::Direct;
  o.margin = 160;
  auto t = green_table(m, g, {0, 0}, Box{61, 2}, 1e-13, o);
  EXPECT_NEAR(t.value(60, 0) / p.value, 1.0, 0.01);
}
