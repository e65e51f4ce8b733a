#include "qwalk/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "qwalk/numeric.hpp"

namespace qwalk {

namespace {

using GK = GeometryError::Kind;

// Safeguarded Newton for an increasing or decreasing f with a sign change on
// [lo, hi]; fdf returns (f, f'). Runs until the bracket cannot shrink.
template <class F>
double safe_newton(F fdf, double lo, double hi, double start) {
  auto [flo, dlo] = fdf(lo);
  auto [fhi, dhi] = fdf(hi);
  (void)dlo;
  (void)dhi;
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw GeometryError(GK::RootFailure, fmt::format("no sign change on [{}, {}]", lo, hi));
  // xl: f < 0, xh: f > 0
  double xl = flo < 0.0 ? lo : hi;
  double xh = flo < 0.0 ? hi : lo;
  double x = start;
  if (!(x > std::min(lo, hi) && x < std::max(lo, hi))) x = 0.5 * (lo + hi);
  for (int it = 0; it < 300; ++it) {
    auto [f, df] = fdf(x);
    if (f == 0.0) return x;
    if (f < 0.0)
      xl = x;
    else
      xh = x;
    double a = std::min(xl, xh), b = std::max(xl, xh);
    double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) return std::fabs(f) <= std::fabs(fdf(a == x ? b : a).first) ? x : (a == x ? b : a);
    double nx = (df != 0.0 && std::isfinite(df)) ? x - f / df : mid;
    if (!(nx > a && nx < b)) nx = mid;
    // accept the Newton step only while it halves the bracket in two steps
    if (std::fabs(nx - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::fabs(x) + 1e-300)
      return nx;
    x = nx;
  }
  return x;
}

bool close_rel(double a, double b, double eps) {
  return std::fabs(a - b) <= eps * std::max(std::fabs(a), std::fabs(b));
}

}  // namespace

AxisGeometry::AxisGeometry(const JumpMeasure& mu, const JumpMeasure& phi) : mu_(mu), phi_(phi) {
  // argmin of alpha -> min_beta P~ by bisection on its increasing derivative
  auto dm = [&](double a) { return dm_of_alpha(a); };
  double lo = -1.0, hi = 1.0;
  for (int k = 0; dm(lo) > 0.0; ++k) {
    lo *= 2.0;
    if (k > 12) throw GeometryError(GK::EmptyInterior, "log-Laplace transform has no minimizer");
  }
  for (int k = 0; dm(hi) < 0.0; ++k) {
    hi *= 2.0;
    if (k > 12) throw GeometryError(GK::EmptyInterior, "log-Laplace transform has no minimizer");
  }
  Bracket b0 = bisect(dm, lo, hi, 0.0, 0.0, 2000);
  alpha0_ = 0.5 * (b0.lo + b0.hi);
  beta0_ = beta_min(alpha0_);
  if (!(m_of_alpha(alpha0_) < 1.0))
    throw GeometryError(GK::EmptyInterior,
                        fmt::format("min P = {} is not below 1", fmt_full(m_of_alpha(alpha0_))));

  auto g = [&](double a) { return m_of_alpha(a) - 1.0; };
  double step = 1.0;
  double aL = alpha0_ - step;
  for (int k = 0; g(aL) <= 0.0; ++k) {
    step *= 2.0;
    aL = alpha0_ - step;
    if (k > 12) throw GeometryError(GK::RootFailure, "unbounded level set");
  }
  step = 1.0;
  double aR = alpha0_ + step;
  for (int k = 0; g(aR) <= 0.0; ++k) {
    step *= 2.0;
    aR = alpha0_ + step;
    if (k > 12) throw GeometryError(GK::RootFailure, "unbounded level set");
  }
  // keep the endpoint that lies inside D
  Bracket bl = bisect(g, aL, alpha0_, 0.0, 0.0, 2000);
  Bracket br = bisect(g, alpha0_, aR, 0.0, 0.0, 2000);
  alo_ = bl.hi;
  ahi_ = br.lo;
  xP_star_ = std::exp(alo_);
  xP_star2_ = std::exp(ahi_);

  // phi(x, Y1(x)) along the branch: grid scan then golden refinement
  auto h = [&](double a) { return branch_phi(std::exp(a)) - 1.0; };
  const int N = 64;
  int imin = 0;
  double hmin = h(alo_);
  std::vector<double> grid(N + 1);
  for (int i = 0; i <= N; ++i) {
    grid[i] = i == N ? ahi_ : alo_ + (ahi_ - alo_) * i / N;
    double v = h(grid[i]);
    if (v < hmin) {
      hmin = v;
      imin = i;
    }
  }
  double amin = grid[imin];
  if (imin > 0 && imin < N) {
    amin = golden_min(h, grid[imin - 1], grid[imin + 1], 1e-14);
    if (h(amin) > hmin) amin = grid[imin];
  }
  hmin = h(amin);
  branch_phi_min_ = hmin + 1.0;
  branch_phi_argmin_ = std::exp(amin);
  corner_phi_ = branch_phi(xP_star2_);
  if (!(hmin < 0.0))
    throw GeometryError(GK::EmptyInterior,
                        fmt::format("phi(x, Y1(x)) >= 1 on the whole branch (min {})",
                                    fmt_full(branch_phi_min_)));

  if (h(ahi_) <= 0.0) {
    x_star2_ = xP_star2_;
  } else {
    Bracket b = bisect(h, amin, ahi_, 0.0, 0.0, 2000);
    x_star2_ = std::exp(b.lo);
  }
  if (h(alo_) <= 0.0) {
    x_star_ = xP_star_;
  } else {
    Bracket b = bisect(h, alo_, amin, 0.0, 0.0, 2000);
    x_star_ = std::exp(b.hi);
  }
}

double AxisGeometry::beta_min(double alpha) const {
  double x = std::exp(alpha);
  // f(beta) = y dP/dy is increasing in beta
  auto fdf = [&](double b) {
    double y = std::exp(b);
    double p1 = mu_.gf_d(0, 1, x, y);
    double p2 = mu_.gf_d(0, 2, x, y);
    return std::pair<double, double>(y * p1, y * p1 + y * y * p2);
  };
  double lo = -1.0, hi = 1.0;
  for (int k = 0; fdf(lo).first > 0.0; ++k) {
    lo *= 2.0;
    if (k > 12) throw GeometryError(GK::RootFailure, "beta minimizer not bracketed");
  }
  for (int k = 0; fdf(hi).first < 0.0; ++k) {
    hi *= 2.0;
    if (k > 12) throw GeometryError(GK::RootFailure, "beta minimizer not bracketed");
  }
  return safe_newton(fdf, lo, hi, 0.0);
}

double AxisGeometry::m_of_alpha(double alpha) const {
  return mu_.gf(std::exp(alpha), std::exp(beta_min(alpha)));
}

double AxisGeometry::dm_of_alpha(double alpha) const {
  double x = std::exp(alpha);
  double y = std::exp(beta_min(alpha));
  return x * mu_.gf_d(1, 0, x, y);
}

std::pair<double, double> AxisGeometry::log_roots(double alpha) const {
  double x = std::exp(alpha);
  double bm = beta_min(alpha);
  auto fdf = [&](double b) {
    double y = std::exp(b);
    return std::pair<double, double>(mu_.gf(x, y) - 1.0, y * mu_.gf_d(0, 1, x, y));
  };
  double gmin = fdf(bm).first;
  if (gmin >= 0.0) {
    double xl = std::exp(alo_), xh = std::exp(ahi_);
    bool edge = std::fabs(x - xl) <= kEpsRoot * xl || std::fabs(x - xh) <= kEpsRoot * xh;
    if (gmin == 0.0 || edge) return {bm, bm};
    throw GeometryError(GK::OutOfRange,
                        fmt::format("x = {} outside [{}, {}]", fmt_full(x), fmt_full(xl), fmt_full(xh)));
  }
  double step = 0.5;
  double bl = bm - step;
  for (int k = 0; fdf(bl).first <= 0.0; ++k) {
    step *= 2.0;
    bl = bm - step;
    if (k > 60) throw GeometryError(GK::RootFailure, "lower root not bracketed");
  }
  step = 0.5;
  double bh = bm + step;
  for (int k = 0; fdf(bh).first <= 0.0; ++k) {
    step *= 2.0;
    bh = bm + step;
    if (k > 60) throw GeometryError(GK::RootFailure, "upper root not bracketed");
  }
  double r1 = safe_newton(fdf, bl, bm, bl);
  double r2 = safe_newton(fdf, bm, bh, bh);
  return {r1, r2};
}

std::pair<double, double> AxisGeometry::roots(double x) const {
  if (!(x > 0.0)) throw GeometryError(GK::OutOfRange, "x must be positive");
  auto [b1, b2] = log_roots(std::log(x));
  return {std::exp(b1), std::exp(b2)};
}

double AxisGeometry::dlower(double x) const {
  double y = lower(x);
  double px = mu_.gf_d(1, 0, x, y), py = mu_.gf_d(0, 1, x, y);
  if (std::fabs(y * py) <= 1e-10 * (std::fabs(x * px) + std::fabs(y * py)))
    throw GeometryError(GK::BranchPoint, fmt::format("dP/dy vanishes at x = {}", fmt_full(x)));
  return -px / py;
}

double AxisGeometry::dupper(double x) const {
  double y = upper(x);
  double px = mu_.gf_d(1, 0, x, y), py = mu_.gf_d(0, 1, x, y);
  if (std::fabs(y * py) <= 1e-10 * (std::fabs(x * px) + std::fabs(y * py)))
    throw GeometryError(GK::BranchPoint, fmt::format("dP/dy vanishes at x = {}", fmt_full(x)));
  return -px / py;
}

double AxisGeometry::dbranch_phi(double x) const {
  double y = lower(x);
  return phi_.gf_d(1, 0, x, y) + phi_.gf_d(0, 1, x, y) * dlower(x);
}

const char* region_name(Region r) {
  static const char* names[] = {"B0", "B1", "B2", "B3", "B4", "B5", "B6", "B7"};
  return names[static_cast<int>(r)];
}

Region swap_region(Region r) {
  switch (r) {
    case Region::B3: return Region::B5;
    case Region::B5: return Region::B3;
    case Region::B4: return Region::B6;
    case Region::B6: return Region::B4;
    default: return r;
  }
}

const char* curve_name(Curve c) {
  static const char* names[] = {"S11", "S12", "S21", "S22"};
  return names[static_cast<int>(c)];
}

const char* direction_class_name(DirectionClass c) {
  static const char* names[] = {"W0", "W1", "W2", "critical", "competition", "singular"};
  return names[static_cast<int>(c)];
}

Geometry::Geometry(const WalkModel& m)
    : model_(m), ax_(m.mu, m.mu1), ay_(m.mu.transposed(), m.mu2.transposed()) {
  cp_.xP_star = ax_.xP_star();
  cp_.xP_star2 = ax_.xP_star2();
  cp_.yP_star = ay_.xP_star();
  cp_.yP_star2 = ay_.xP_star2();
  cp_.x_star = ax_.x_star();
  cp_.x_star2 = ax_.x_star2();
  cp_.y_star = ay_.x_star();
  cp_.y_star2 = ay_.x_star2();
  cp_.corner_phi1 = ax_.corner_phi();
  cp_.corner_phi2 = ay_.corner_phi();
  classify();
  if (supported()) compute_partition();
}

namespace {

enum class Status { Out, On, In };
enum class Side { L, R, Mid };

struct Pos {
  Status status;
  Side side;
};

Pos position(double v, double lo, double hi, double eps, std::vector<std::string>& warn,
             const char* what) {
  bool eqL = close_rel(v, lo, eps), eqR = close_rel(v, hi, eps);
  auto near = [&](double a, double b) { return close_rel(a, b, 10.0 * eps) && !close_rel(a, b, eps); };
  if (near(v, lo) || near(v, hi))
    warn.push_back(fmt::format("{} within 10 eps_class of a segment endpoint", what));
  if (eqL) return {Status::On, Side::L};
  if (eqR) return {Status::On, Side::R};
  if (v < lo) return {Status::Out, Side::L};
  if (v > hi) return {Status::Out, Side::R};
  return {Status::In, Side::Mid};
}

}  // namespace

void Geometry::classify() {
  double xs2 = cp_.x_star2, ys2 = cp_.y_star2;
  auto [Y1x, Y2x] = ax_.roots(xs2);
  auto [X1y, X2y] = ay_.roots(ys2);
  label_.X1_ys2 = X1y;
  label_.X2_ys2 = X2y;
  label_.Y1_xs2 = Y1x;
  label_.Y2_xs2 = Y2x;
  auto& warn = label_.boundary_warnings;
  Pos px = position(xs2, X1y, X2y, kEpsClass, warn, "x**");
  Pos py = position(ys2, Y1x, Y2x, kEpsClass, warn, "y**");

  if (px.status != py.status) {
    warn.push_back("inconsistent trichotomies for (x**, y**); resolved to the boundary case");
    auto snap = [](Pos& p, double v, double lo, double hi) {
      if (p.status == Status::On) return;
      p.status = Status::On;
      p.side = std::fabs(v - lo) <= std::fabs(v - hi) ? Side::L : Side::R;
    };
    snap(px, xs2, X1y, X2y);
    snap(py, ys2, Y1x, Y2x);
  }

  using S = Status;
  Region r;
  if (px.status == S::In)
    r = Region::B0;
  else if (px.status == S::On) {
    if (px.side == Side::R && py.side == Side::R)
      r = Region::B1;
    else if (px.side == Side::L && py.side == Side::R)
      r = Region::B3;
    else if (px.side == Side::R && py.side == Side::L)
      r = Region::B5;
    else
      r = Region::B7;
  } else {
    if (px.side == Side::R && py.side == Side::R)
      r = Region::B2;
    else if (px.side == Side::L && py.side == Side::R)
      r = Region::B4;
    else if (px.side == Side::R && py.side == Side::L)
      r = Region::B6;
    else
      throw GeometryError(GK::RootFailure,
                          "x** < X1(y**) together with y** < Y1(x**) cannot occur");
  }
  label_.region = r;

  bool stochastic = is_stochastic(model_.mu) && is_stochastic(model_.mu1) &&
                    is_stochastic(model_.mu2) && is_stochastic(model_.mu0);
  switch (r) {
    case Region::B0:
    case Region::B1:
    case Region::B2:
      cp_.x_d = xs2;
      cp_.y_d = ys2;
      break;
    case Region::B3:
    case Region::B4:
      cp_.x_d = xs2;
      cp_.y_d = Y2x;
      if (stochastic && !(cp_.y_star <= 1.0 + kEpsClass && 1.0 < Y2x))
        warn.push_back("expected y* <= 1 < Y2(x**)");
      break;
    case Region::B5:
    case Region::B6:
      cp_.x_d = X2y;
      cp_.y_d = ys2;
      if (stochastic && !(cp_.x_star <= 1.0 + kEpsClass && 1.0 < X2y))
        warn.push_back("expected x* <= 1 < X2(y**)");
      break;
    case Region::B7:
      break;
  }
  cp_.has_dominant = r != Region::B7;
  if (cp_.has_dominant) {
    label_.xd_at_corner = close_rel(cp_.x_d, cp_.xP_star2, kEpsClass);
    label_.yd_at_corner = close_rel(cp_.y_d, cp_.yP_star2, kEpsClass);
  }
  label_.phi1_corner_eq_one = std::fabs(cp_.corner_phi1 - 1.0) <= kEpsClass;
  label_.phi2_corner_eq_one = std::fabs(cp_.corner_phi2 - 1.0) <= kEpsClass;
}

std::vector<Curve> Geometry::curve_label(double x, double y) const {
  double p = P(x, y);
  if (std::fabs(p - 1.0) > 1e-9)
    throw GeometryError(GK::NotOnBoundary, fmt::format("P(x,y) - 1 = {}", p - 1.0));
  double gx = x * Px(x, y), gy = y * Py(x, y);
  double scale = std::fabs(gx) + std::fabs(gy);
  if (scale == 0.0) throw GeometryError(GK::ZeroGradient, "gradient vanishes on the boundary");
  int sx = std::fabs(gx) <= 1e-9 * scale ? 0 : (gx > 0 ? 1 : -1);
  int sy = std::fabs(gy) <= 1e-9 * scale ? 0 : (gy > 0 ? 1 : -1);
  std::vector<Curve> out;
  if (sx <= 0 && sy <= 0) out.push_back(Curve::S11);
  if (sx <= 0 && sy >= 0) out.push_back(Curve::S12);
  if (sx >= 0 && sy <= 0) out.push_back(Curve::S21);
  if (sx >= 0 && sy >= 0) out.push_back(Curve::S22);
  return out;
}

std::array<double, 2> Geometry::direction_of_point(double x, double y) const {
  double p = P(x, y);
  if (std::fabs(p - 1.0) > 1e-9)
    throw GeometryError(GK::NotOnBoundary, fmt::format("P(x,y) - 1 = {}", p - 1.0));
  double gx = x * Px(x, y), gy = y * Py(x, y);
  double n = std::hypot(gx, gy);
  if (n == 0.0) throw GeometryError(GK::ZeroGradient, "gradient vanishes on the boundary");
  return {gx / n, gy / n};
}

namespace {

// Point of the arc {(x, upper(x))} from the topmost point to the rightmost
// point whose gradient angle equals psi, in the coordinates of `side`.
std::pair<double, double> arc_point(const AxisGeometry& side, const AxisGeometry& other,
                                    double psi) {
  double aT = std::log(other.lower(other.xP_star2()));
  double aR = std::log(side.xP_star2());
  auto angle = [&](double a) {
    double x = std::exp(a);
    double y = side.upper(x);
    double gx = x * side.mu().gf_d(1, 0, x, y);
    double gy = y * side.mu().gf_d(0, 1, x, y);
    return std::atan2(gy, gx);
  };
  double lo = aT, hi = aR;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (angle(mid) > psi)
      lo = mid;
    else
      hi = mid;
  }
  double a = 0.5 * (lo + hi);
  double x = std::exp(a);
  return {x, side.upper(x)};
}

}  // namespace

std::pair<double, double> Geometry::point_of_direction(double u, double v) const {
  if (!(u >= 0.0 && v >= 0.0) || (u == 0.0 && v == 0.0))
    throw GeometryError(GK::OutOfRange, "direction must lie in the positive quadrant");
  if (v == 0.0) return {cp_.xP_star2, Y1(cp_.xP_star2)};
  if (u == 0.0) return {X1(cp_.yP_star2), cp_.yP_star2};
  if (u > v) return arc_point(ax_, ay_, std::atan2(v, u));
  if (v > u) {
    auto [b, a] = arc_point(ay_, ax_, std::atan2(u, v));
    return {a, b};
  }
  // exact diagonal: symmetric combination of both parametrizations
  auto p1 = arc_point(ax_, ay_, std::atan2(v, u));
  auto p2 = arc_point(ay_, ax_, std::atan2(u, v));
  return {0.5 * (p1.first + p2.second), 0.5 * (p1.second + p2.first)};
}

void Geometry::compute_partition() {
  DirectionPartition& d = part_;
  double xd = cp_.x_d, yd = cp_.y_d;
  auto unit = [](double a, double b) {
    double n = std::hypot(a, b);
    return std::array<double, 2>{a / n, b / n};
  };
  switch (label_.region) {
    case Region::B0: {
      double X2d = X2(yd), Y2d = Y2(xd);
      double v1 = std::log(cp_.x_star2) - std::log(X2(cp_.y_star2));
      double v2 = std::log(X2(cp_.y_star2)) - std::log(cp_.y_star2);
      // orthogonal to (v1, v2), oriented into the closed positive quadrant
      std::array<double, 2> w = unit(-v2, v1);
      if (w[0] < 0.0 || w[1] < 0.0) w = {-w[0], -w[1]};
      if (w[0] >= 0.0 && w[1] >= 0.0)
        d.w_c = w;
      else
        d.description = "displayed critical vector has no orthogonal direction in the quadrant; ";
      d.w_c_equal_decay = unit(std::log(Y2d) - std::log(yd), std::log(X2d) - std::log(xd));
      d.W1_empty = false;
      d.W2_empty = false;
      d.description += "W1 = {u > u_c}, W2 = {u < u_c}, W0 empty";
      break;
    }
    case Region::B1: {
      auto w = direction_of_point(xd, Y2(xd));
      d.w_c = w;
      d.W1_empty = false;
      d.W2_empty = false;
      d.description = "W1 = {u > u_c}, W2 = {u < u_c}, W0 empty; w_c singular";
      break;
    }
    case Region::B2: {
      d.u_low = direction_of_point(X2(yd), yd)[0];
      d.u_high = direction_of_point(xd, Y2(xd))[0];
      d.W0_empty = !(d.u_low < d.u_high);
      d.W1_empty = label_.xd_at_corner;
      d.W2_empty = label_.yd_at_corner;
      d.description = "W0 = {u_low < u < u_high}, W1 = {u > u_high}, W2 = {u < u_low}";
      break;
    }
    case Region::B3:
      d.W1_empty = false;
      d.description = "W1 = quadrant minus (0,1)";
      break;
    case Region::B4:
      d.W1_empty = false;
      d.description = "W1 = whole quadrant";
      break;
    case Region::B5:
      d.W2_empty = false;
      d.description = "W2 = quadrant minus (1,0)";
      break;
    case Region::B6:
      d.W2_empty = false;
      d.description = "W2 = whole quadrant";
      break;
    case Region::B7:
      break;
  }
}

const DirectionPartition& Geometry::partition() const {
  if (!supported())
    throw GeometryError(GK::UnsupportedRegion, "region B7 unsupported for asymptotics");
  return part_;
}

DirectionClass Geometry::classify_direction(double u, double v, double tol) const {
  const DirectionPartition& d = partition();
  double n = std::hypot(u, v);
  u /= n;
  v /= n;
  double psi = std::atan2(v, u);
  auto ang = [](double a, double b) { return std::atan2(b, a); };
  auto near_u = [&](double uc) {
    return std::fabs(psi - ang(uc, std::sqrt(std::max(0.0, 1.0 - uc * uc)))) <= tol;
  };
  switch (label_.region) {
    case Region::B0: {
      const auto& wc = d.w_c ? *d.w_c : *d.w_c_equal_decay;
      if (std::fabs(psi - ang(wc[0], wc[1])) <= tol) return DirectionClass::Critical;
      return u > wc[0] ? DirectionClass::W1 : DirectionClass::W2;
    }
    case Region::B1: {
      const auto& wc = *d.w_c;
      if (std::fabs(psi - ang(wc[0], wc[1])) <= tol) return DirectionClass::Singular;
      return u > wc[0] ? DirectionClass::W1 : DirectionClass::W2;
    }
    case Region::B2:
      if (near_u(d.u_low) || near_u(d.u_high)) return DirectionClass::Singular;
      if (u > d.u_high) return DirectionClass::W1;
      if (u < d.u_low) return DirectionClass::W2;
      return DirectionClass::W0;
    case Region::B3:
      if (std::fabs(psi - M_PI / 2) <= tol)
        return label_.yd_at_corner ? DirectionClass::Singular : DirectionClass::Competition;
      return DirectionClass::W1;
    case Region::B4: return DirectionClass::W1;
    case Region::B5:
      if (std::fabs(psi) <= tol)
        return label_.xd_at_corner ? DirectionClass::Singular : DirectionClass::Competition;
      return DirectionClass::W2;
    case Region::B6: return DirectionClass::W2;
    case Region::B7: break;
  }
  throw GeometryError(GK::UnsupportedRegion, "region B7 unsupported for asymptotics");
}

}  // namespace qwalk
