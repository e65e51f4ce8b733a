#pragma once

#include <string>
#include <vector>

#include "qwalk/geometry.hpp"
#include "qwalk/model.hpp"

namespace qwalk::testing {

struct ReferenceModel {
  std::string file;  // name under tests/data
  Region region;
  WalkModel model;
  double parameter = 0;  // bisected parameter, 0 when fixed
};

// M_R0 and one model per region B0, B1, B3, B4, B5, B6. The boundary regions
// come from bisecting a one-parameter family on the defining equality.
std::vector<ReferenceModel> construct_reference_models();

// the frozen files, in the same order
std::vector<ReferenceModel> load_reference_models(const std::string& data_dir);

}  // namespace qwalk::testing
