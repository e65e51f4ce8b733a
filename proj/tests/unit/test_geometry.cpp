#include <gtest/gtest.h>

#include <cmath>

#include "qwalk/geometry.hpp"

using namespace qwalk;

namespace {

Geometry load(const char* file) {
  auto m = load_model(std::string(QWALK_TEST_DATA) + "/" + file);
  require_valid(m);
  return Geometry(m);
}

}  // namespace

// 50-digit roots of the discriminant and of phi1(x, Y1(x)) = 1 (tests/oracles)
TEST(Geometry, CriticalPointsOfTestModel) {
  auto g = load("m_r0.model");
  const auto& cp = g.critical();
  EXPECT_NEAR(cp.xP_star2, 1.2159126010554596, 1e-12);
  EXPECT_NEAR(cp.x_star2, 1.2110692390260561, 1e-12);
  EXPECT_NEAR(cp.x_d, cp.x_star2, 1e-15);
  EXPECT_NEAR(cp.y_d, cp.x_d, 1e-12);
  EXPECT_NEAR(cp.x_star, 1.0, 1e-12);
  EXPECT_EQ(g.region().region, Region::B2);
}

TEST(Geometry, BranchesOfTestModel) {
  auto g = load("m_r0.model");
  EXPECT_NEAR(g.Y1(1.1), 0.95739889032376297, 1e-13);
  EXPECT_NEAR(g.Y2(1.1), 1.2051885222636496, 1e-13);
  EXPECT_NEAR(g.Y1(1.0), 1.0, 1e-13);
}

TEST(Geometry, KernelResidualAndConvexity) {
  auto g = load("m_r0.model");
  double lo = g.critical().xP_star, hi = g.critical().xP_star2;
  for (int i = 0; i < 50; ++i) {
    double x1 = lo + (hi - lo) * (i + 0.5) / 50, x2 = lo + (hi - lo) * (49.5 - i) / 50;
    EXPECT_LT(std::fabs(g.P(x1, g.Y1(x1)) - 1), 1e-10);
    EXPECT_LE(g.Y1(x1), g.Y2(x1));
    EXPECT_LE(g.Y1((x1 + x2) / 2), (g.Y1(x1) + g.Y1(x2)) / 2 + 1e-10);
  }
}

TEST(Geometry, ImplicitDerivative) {
  auto g = load("m_r0.model");
  for (double x : {0.97, 1.05, 1.15}) {
    double h = 1e-6;
    double fd = (g.Y1(x + h) - g.Y1(x - h)) / (2 * h);
    EXPECT_NEAR(g.dY1(x), fd, 1e-7);
  }
}

TEST(Geometry, BoundaryModelEdge) {
  auto g = load("b0.model");
  EXPECT_EQ(g.region().region, Region::B0);
  EXPECT_NEAR(g.critical().x_star2, 1.1003717327812452, 1e-13);
}

// u of the log-gradient at (x_d, Y2(x_d)) and its mirror, 50 digits
TEST(Directions, PartitionOfTestModel) {
  auto g = load("m_r0.model");
  const auto& d = g.partition();
  EXPECT_NEAR(d.u_high, 0.96813099037268543, 1e-10);
  EXPECT_NEAR(d.u_low, 0.25044437601991238, 1e-10);
  EXPECT_EQ(g.classify_direction(1, 1), DirectionClass::W0);
  EXPECT_EQ(g.classify_direction(1, 0), DirectionClass::W1);
  EXPECT_EQ(g.classify_direction(0, 1), DirectionClass::W2);
  double v = std::sqrt(1 - d.u_low * d.u_low);
  EXPECT_EQ(g.classify_direction(d.u_low, v), DirectionClass::Singular);
}

TEST(Directions, CriticalDirectionOfSymmetricModel) {
  auto g = load("b0.model");
  ASSERT_TRUE(g.partition().w_c.has_value());
  auto w = *g.partition().w_c;
  EXPECT_NEAR(w[0], std::sqrt(0.5), 1e-9);
  EXPECT_NEAR(w[1], std::sqrt(0.5), 1e-9);
  EXPECT_EQ(g.classify_direction(1, 1), DirectionClass::Critical);
  EXPECT_EQ(g.classify_direction(2, 1), DirectionClass::W1);
  EXPECT_EQ(g.classify_direction(1, 2), DirectionClass::W2);
}

TEST(Regions, SwapSymmetryAndB7) {
  for (const char* f : {"m_r0.model", "b0.model", "b1.model", "b3.model", "b4.model", "b5.model", "b6.model",
                        "b7.model"}) {
    auto g = load(f);
    auto t = g.model().transposed();
    require_valid(t);
    EXPECT_EQ(Geometry(t).region().region, swap_region(g.region().region)) << f;
  }
  auto g7 = load("b7.model");
  EXPECT_EQ(g7.region().region, Region::B7);
  EXPECT_FALSE(g7.supported());
  EXPECT_THROW(g7.partition(), GeometryError);
}
