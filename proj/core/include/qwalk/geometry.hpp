#pragma once

#include <array>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qwalk/model.hpp"

namespace qwalk {

constexpr double kEpsRoot = 1e-12;
constexpr double kEpsClass = 1e-9;
constexpr double kAngleTol = 1e-6;

class GeometryError : public std::runtime_error {
 public:
  enum class Kind {
    EmptyInterior,
    OutOfRange,
    BranchPoint,
    NotOnBoundary,
    ZeroGradient,
    UnsupportedRegion,
    RootFailure
  };
  GeometryError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Level-set geometry seen from one axis: the x-range of D, the branches
// Y1 <= Y2 and the free endpoints x*, x** of the boundary measure mu1.
// The y-side objects of a model are this class applied to its transpose.
class AxisGeometry {
 public:
  AxisGeometry(const JumpMeasure& mu, const JumpMeasure& phi);

  double P(double x, double y) const { return mu_.gf(x, y); }
  double phi(double x, double y) const { return phi_.gf(x, y); }
  const JumpMeasure& mu() const { return mu_; }
  const JumpMeasure& phi_measure() const { return phi_; }

  double xP_star() const { return xP_star_; }
  double xP_star2() const { return xP_star2_; }
  double x_star() const { return x_star_; }
  double x_star2() const { return x_star2_; }
  double corner_phi() const { return corner_phi_; }
  // min over the branch of phi(x, Y1(x)) and where it is attained
  double branch_phi_min() const { return branch_phi_min_; }
  double branch_phi_argmin() const { return branch_phi_argmin_; }
  // argmin of the log-Laplace transform
  std::pair<double, double> center() const { return {alpha0_, beta0_}; }

  double beta_min(double alpha) const;
  std::pair<double, double> roots(double x) const;
  double lower(double x) const { return roots(x).first; }
  double upper(double x) const { return roots(x).second; }
  double dlower(double x) const;
  double dupper(double x) const;
  double branch_phi(double x) const { return phi(x, lower(x)); }
  // d/dx phi(x, Y1(x))
  double dbranch_phi(double x) const;

 private:
  double m_of_alpha(double alpha) const;
  double dm_of_alpha(double alpha) const;
  std::pair<double, double> log_roots(double alpha) const;

  JumpMeasure mu_;
  JumpMeasure phi_;
  double alpha0_ = 0, beta0_ = 0;
  double alo_ = 0, ahi_ = 0;
  double xP_star_ = 0, xP_star2_ = 0, x_star_ = 0, x_star2_ = 0;
  double corner_phi_ = 0;
  double branch_phi_min_ = 0, branch_phi_argmin_ = 0;
};

struct CriticalPoints {
  double xP_star = 0, xP_star2 = 0, yP_star = 0, yP_star2 = 0;
  double x_star = 0, x_star2 = 0, y_star = 0, y_star2 = 0;
  double x_d = 0, y_d = 0;
  bool has_dominant = false;
  double corner_phi1 = 0, corner_phi2 = 0;
};

enum class Region { B0, B1, B2, B3, B4, B5, B6, B7 };

const char* region_name(Region r);
Region swap_region(Region r);

struct RegionLabel {
  Region region = Region::B0;
  bool xd_at_corner = false;
  bool yd_at_corner = false;
  bool phi1_corner_eq_one = false;
  bool phi2_corner_eq_one = false;
  std::vector<std::string> boundary_warnings;
  // the six comparison scalars
  double X1_ys2 = 0, X2_ys2 = 0, Y1_xs2 = 0, Y2_xs2 = 0;
};

enum class Curve { S11, S12, S21, S22 };
const char* curve_name(Curve c);

enum class DirectionClass { W0, W1, W2, Critical, Competition, Singular };
const char* direction_class_name(DirectionClass c);

struct DirectionPartition {
  std::optional<std::array<double, 2>> w_c;
  // critical direction from the equal-decay condition; equals w_c for
  // models symmetric under the axis swap
  std::optional<std::array<double, 2>> w_c_equal_decay;
  double u_low = std::numeric_limits<double>::quiet_NaN();
  double u_high = std::numeric_limits<double>::quiet_NaN();
  bool W0_empty = true, W1_empty = true, W2_empty = true;
  std::string description;
};

class Geometry {
 public:
  explicit Geometry(const WalkModel& m);

  const WalkModel& model() const { return model_; }
  const AxisGeometry& xside() const { return ax_; }
  const AxisGeometry& yside() const { return ay_; }

  double P(double x, double y) const { return model_.mu.gf(x, y); }
  double Px(double x, double y) const { return model_.mu.gf_d(1, 0, x, y); }
  double Py(double x, double y) const { return model_.mu.gf_d(0, 1, x, y); }
  double phi1(double x, double y) const { return model_.mu1.gf(x, y); }
  double phi2(double x, double y) const { return model_.mu2.gf(x, y); }

  double Y1(double x) const { return ax_.lower(x); }
  double Y2(double x) const { return ax_.upper(x); }
  double X1(double y) const { return ay_.lower(y); }
  double X2(double y) const { return ay_.upper(y); }
  double dY1(double x) const { return ax_.dlower(x); }
  double dX1(double y) const { return ay_.dlower(y); }

  const CriticalPoints& critical() const { return cp_; }
  const RegionLabel& region() const { return label_; }
  bool supported() const { return label_.region != Region::B7; }

  std::vector<Curve> curve_label(double x, double y) const;
  std::array<double, 2> direction_of_point(double x, double y) const;
  std::pair<double, double> point_of_direction(double u, double v) const;
  const DirectionPartition& partition() const;
  DirectionClass classify_direction(double u, double v, double tol = kAngleTol) const;

 private:
  void classify();
  void compute_partition();

  WalkModel model_;
  AxisGeometry ax_;
  AxisGeometry ay_;
  CriticalPoints cp_;
  RegionLabel label_;
  DirectionPartition part_;
};

}  // namespace qwalk
