#include "reference_models.hpp"

#include <fmt/format.h>

#include <functional>

#include "qwalk/numeric.hpp"

namespace qwalk::testing {

namespace {

JumpMeasure interior() {
  return JumpMeasure(Role::Interior,
                     {{1, 0, 0.15}, {-1, 0, 0.30}, {0, 1, 0.15}, {0, -1, 0.30}, {1, 1, 0.10}});
}

WalkModel make(JumpMeasure mu1, JumpMeasure mu2, const std::string& name) {
  WalkModel m;
  m.mu = interior();
  m.mu0 = JumpMeasure(Role::Origin, {{1, 0, 0.5}, {0, 1, 0.5}});
  m.mu1 = std::move(mu1);
  m.mu2 = std::move(mu2);
  m.name = name;
  require_valid(m);
  return m;
}

JumpMeasure h(double right, double left, double up) {
  return JumpMeasure(Role::HBoundary, {{1, 0, right}, {-1, 0, left}, {0, 1, up}});
}

JumpMeasure v(double up, double down, double right) {
  return JumpMeasure(Role::VBoundary, {{0, 1, up}, {0, -1, down}, {1, 0, right}});
}

// parameter where f changes sign, to the last double
double solve(const std::function<double(double)>& f, double lo, double hi) {
  Bracket b = bisect(f, lo, hi, 0.0, 0.0);
  return std::abs(f(b.lo)) <= std::abs(f(b.hi)) ? b.lo : b.hi;
}

WalkModel b1(double p) { return make(h(p, 0.7 - p, 0.3), v(p, 0.7 - p, 0.3), "B1"); }
WalkModel b3(double t) { return make(h(0.4 + 0.2 * t, 0.1, 0.5 - 0.2 * t), v(0.3, 0.4, 0.3), "B3"); }
WalkModel b5(double t) {
  return make(h(0.3, 0.4, 0.3), v(0.4 + 0.15 * t, 0.1 + 0.2 * t, 0.5 - 0.35 * t), "B5");
}

}  // namespace

std::vector<ReferenceModel> construct_reference_models() {
  std::vector<ReferenceModel> out;
  out.push_back({"m_r0.model", Region::B2, make(h(0.3, 0.4, 0.3), v(0.3, 0.4, 0.3), "M_R0"), 0});
  out.push_back({"b0.model", Region::B0, make(h(0.4, 0.3, 0.3), v(0.4, 0.3, 0.3), "B0"), 0});

  // x** = X2(y**)
  double p = solve(
      [](double p) {
        Geometry g(b1(p));
        return g.critical().x_star2 - g.region().X2_ys2;
      },
      0.33, 0.36);
  out.push_back({"b1.model", Region::B1, b1(p), p});

  // y** = Y2(x**)
  double t3 = solve(
      [](double t) {
        Geometry g(b3(t));
        return g.critical().y_star2 - g.region().Y2_xs2;
      },
      0.2, 0.3);
  out.push_back({"b3.model", Region::B3, b3(t3), t3});
  out.push_back({"b4.model", Region::B4, make(h(0.6, 0.3, 0.1), v(0.3, 0.4, 0.3), "B4"), 0});

  // x** = X2(y**)
  double t5 = solve(
      [](double t) {
        Geometry g(b5(t));
        return g.critical().x_star2 - g.region().X2_ys2;
      },
      0.0, 0.5);
  out.push_back({"b5.model", Region::B5, b5(t5), t5});
  out.push_back({"b6.model", Region::B6, make(h(0.3, 0.4, 0.3), v(0.55, 0.3, 0.15), "B6"), 0});
  return out;
}

std::vector<ReferenceModel> load_reference_models(const std::string& data_dir) {
  std::vector<ReferenceModel> out;
  const std::pair<const char*, Region> files[] = {
      {"m_r0.model", Region::B2}, {"b0.model", Region::B0}, {"b1.model", Region::B1},
      {"b3.model", Region::B3},   {"b4.model", Region::B4}, {"b5.model", Region::B5},
      {"b6.model", Region::B6}};
  for (auto [f, r] : files) {
    WalkModel m = load_model(data_dir + "/" + f);
    require_valid(m);
    out.push_back({f, r, std::move(m), 0});
  }
  return out;
}

}  // namespace qwalk::testing
