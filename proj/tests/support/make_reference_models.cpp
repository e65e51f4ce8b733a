// Writes the reference models to a directory: make_reference_models DIR
#include <fmt/format.h>

#include <fstream>
#include <iostream>

#include "qwalk/numeric.hpp"
#include "reference_models.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_reference_models DIR\n";
    return 2;
  }
  for (const auto& r : qwalk::testing::construct_reference_models()) {
    std::ofstream out(std::string(argv[1]) + "/" + r.file);
    out << fmt::format("# reference model {} (region {})", r.model.name, qwalk::region_name(r.region));
    if (r.parameter != 0) out << ", parameter " << qwalk::fmt_full(r.parameter);
    out << "\n" << qwalk::format_model(r.model);
    qwalk::Geometry g(r.model);
    fmt::print("{:12} {} -> {}\n", r.file, qwalk::region_name(r.region),
               qwalk::region_name(g.region().region));
  }
  return 0;
}
