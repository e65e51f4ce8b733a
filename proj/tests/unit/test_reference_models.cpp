#include <gtest/gtest.h>

#include "qwalk/geometry.hpp"
#include "reference_models.hpp"

using namespace qwalk;

// the construction script reproduces the frozen files exactly
TEST(ReferenceModels, ConstructionMatchesFrozenFiles) {
  auto built = qwalk::testing::construct_reference_models();
  auto frozen = qwalk::testing::load_reference_models(QWALK_TEST_DATA);
  ASSERT_EQ(built.size(), frozen.size());
  for (std::size_t i = 0; i < built.size(); ++i) {
    EXPECT_EQ(built[i].file, frozen[i].file);
    EXPECT_EQ(built[i].model.mu, frozen[i].model.mu) << built[i].file;
    EXPECT_EQ(built[i].model.mu0, frozen[i].model.mu0) << built[i].file;
    EXPECT_EQ(built[i].model.mu1, frozen[i].model.mu1) << built[i].file;
    EXPECT_EQ(built[i].model.mu2, frozen[i].model.mu2) << built[i].file;
  }
}

TEST(ReferenceModels, ClassifyToIntendedRegions) {
  for (auto& r : qwalk::testing::load_reference_models(QWALK_TEST_DATA)) {
    require_valid(r.model);
    Geometry g(r.model);
    EXPECT_EQ(g.region().region, r.region) << r.file;
  }
}

// the bisected families sit on their defining equalities
TEST(ReferenceModels, BoundaryEqualitiesHold) {
  for (auto& r : qwalk::testing::load_reference_models(QWALK_TEST_DATA)) {
    require_valid(r.model);
    Geometry g(r.model);
    const auto& cp = g.critical();
    if (r.region == Region::B1 || r.region == Region::B5)
      EXPECT_NEAR(cp.x_star2, g.X2(cp.y_star2), 1e-9) << r.file;
    if (r.region == Region::B3) EXPECT_NEAR(cp.y_star2, g.Y2(cp.x_star2), 1e-9) << r.file;
  }
}
