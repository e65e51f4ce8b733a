#include "qwalk/asymptotics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "qwalk/numeric.hpp"

namespace qwalk {

namespace {

using AK = AsymptoticsError::Kind;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool in(Region r, std::initializer_list<Region> set) {
  return std::find(set.begin(), set.end(), r) != set.end();
}

void require_supported(const Geometry& g) {
  if (!g.supported())
    throw AsymptoticsError(AK::UnsupportedRegion, "region B7 unsupported for asymptotics");
}

// phi1(x_d, Y1(x_d)) = 1 within the classification tolerance
bool x_pole_cancels(const Geometry& g) {
  double xd = g.critical().x_d;
  return std::fabs(g.phi1(xd, g.Y1(xd)) - 1.0) <= kEpsClass;
}

// p = (y - r) q + remainder, remainder dropped; division from the top
std::vector<double> deflate(const std::vector<double>& p, double r) {
  std::size_t d = p.size() - 1;
  std::vector<double> q(d, 0.0);
  if (d == 0) return q;
  q[d - 1] = p[d];
  for (std::size_t i = d - 1; i >= 1; --i) q[i - 1] = p[i] + r * q[i];
  return q;
}

}  // namespace

const char* kappa_kind_name(KappaKind k) {
  switch (k) {
    case KappaKind::Kappa1: return "kappa1";
    case KappaKind::Kappa2: return "kappa2";
    case KappaKind::Kappa1Tilde: return "kappa1_tilde";
    case KappaKind::Kappa2Tilde: return "kappa2_tilde";
    case KappaKind::KappaDir: return "kappa_dir";
  }
  return "?";
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::AxisSimplePole: return "axis_simple_pole";
    case Regime::AxisSquareRoot: return "axis_square_root";
    case Regime::AxisSquareRootTilde: return "axis_square_root_tilde";
    case Regime::AxisDoublePole: return "axis_double_pole";
    case Regime::AxisCornerPole: return "axis_corner_pole";
    case Regime::AxisCornerSquareRoot: return "axis_corner_square_root";
    case Regime::AxisSimplePoleKappa2: return "axis_simple_pole_kappa2";
    case Regime::DirectionW1: return "W1";
    case Regime::DirectionW2: return "W2";
    case Regime::DirectionCritical: return "critical";
    case Regime::DirectionCompetitionY: return "competition_y";
    case Regime::DirectionCompetitionX: return "competition_x";
    case Regime::DirectionW0: return "W0";
  }
  return "?";
}

// ------------------------------------------------------------ harmonic functions

std::array<double, 2> kappa_point(const Geometry& g, KappaKind kind) {
  require_supported(g);
  const auto& cp = g.critical();
  const auto& lab = g.region();
  Region r = lab.region;
  auto undefined = [&](const char* what) {
    return AsymptoticsError(AK::UndefinedInRegion,
                            fmt::format("{} undefined in region {}", what, region_name(r)));
  };
  switch (kind) {
    case KappaKind::Kappa1: {
      if (!in(r, {Region::B0, Region::B1, Region::B2, Region::B3, Region::B4})) throw undefined("kappa1");
      double y = g.Y1(cp.x_d);
      if (!(y < cp.y_d)) throw undefined("kappa1 (Y1(x_d) >= y_d)");
      return {cp.x_d, y};
    }
    case KappaKind::Kappa2: {
      if (!in(r, {Region::B0, Region::B1, Region::B2, Region::B5, Region::B6})) throw undefined("kappa2");
      double x = g.X1(cp.y_d);
      if (!(x < cp.x_d)) throw undefined("kappa2 (X1(y_d) >= x_d)");
      return {x, cp.y_d};
    }
    case KappaKind::Kappa1Tilde:
      if (r != Region::B2 || !lab.xd_at_corner || lab.phi1_corner_eq_one) throw undefined("kappa1_tilde");
      return {cp.xP_star2, g.Y1(cp.xP_star2)};
    case KappaKind::Kappa2Tilde:
      if (r != Region::B2 || !lab.yd_at_corner || lab.phi2_corner_eq_one) throw undefined("kappa2_tilde");
      return {g.X1(cp.yP_star2), cp.yP_star2};
    case KappaKind::KappaDir:
      throw AsymptoticsError(AK::MissingInput, "kappa_dir needs an explicit point");
  }
  throw undefined("kappa");
}

namespace {

void check_dir_point(const Geometry& g, double x, double y) {
  require_supported(g);
  if (g.region().region != Region::B2)
    throw AsymptoticsError(AK::UndefinedInRegion, "kappa_dir needs region B2");
  const auto& cp = g.critical();
  bool on = std::fabs(g.P(x, y) - 1.0) <= 1e-9 && g.Px(x, y) >= -1e-12 && g.Py(x, y) >= -1e-12;
  if (!on) throw AsymptoticsError(AK::NotOnS22, fmt::format("({}, {}) not on S22", fmt_short(x), fmt_short(y)));
  if (!(x < cp.x_d && y < cp.y_d))
    throw AsymptoticsError(AK::UndefinedInRegion, "kappa_dir needs x < x_d and y < y_d");
}

HarmonicFnValues blank(KappaKind kind, double x, double y, Box box) {
  HarmonicFnValues h;
  h.kind = kind;
  h.x = x;
  h.y = y;
  h.box = box;
  h.values.assign(box.size(), 0.0);
  h.bound.assign(box.size(), 0.0);
  return h;
}

// L_j + (phi1 - 1) H_j(x,0) + (phi2 - 1) H_j(0,y), axis terms optional
HarmonicFnValues combine(const WalkModel& m, const ColumnOracle& o, KappaKind kind, double x,
                         double y, bool use_x, bool use_y) {
  const Box& b = o.jbox();
  auto h = blank(kind, x, y, b);
  auto hit = o.hitting();
  BoundedVec hx, hy;
  if (use_x) hx = o.axis_series(0, x);
  if (use_y) hy = o.axis_series(1, y);
  double f1 = m.mu1.gf(x, y) - 1.0, f2 = m.mu2.gf(x, y) - 1.0;
  for (int j2 = 0; j2 <= b.ky; ++j2)
    for (int j1 = 0; j1 <= b.kx; ++j1) {
      std::size_t i = b.index(j1, j2);
      ExactSum v;
      v.add(eval_L(m, j1, j2, x, y, hit.value[i]));
      double err = hit.bound[i];
      if (use_x) {
        v.add(f1 * hx.value[i]);
        err += std::fabs(f1) * hx.bound[i];
      }
      if (use_y) {
        v.add(f2 * hy.value[i]);
        err += std::fabs(f2) * hy.bound[i];
      }
      h.values[i] = v.value();
      h.bound[i] = err;
    }
  return h;
}

// d/dy of (L_j + (phi2 - 1) H_j(0,y)) / (1 - phi1) at (x, y); the mirror
// is obtained on the transposed model with the axes swapped by the caller
HarmonicFnValues tilde(const WalkModel& m, const ColumnOracle& o, KappaKind kind, double x, double y,
                       int axis) {
  const Box& b = o.jbox();
  auto h = blank(kind, x, y, b);
  auto hit = o.hitting();
  // axis 1: series in y along k1 = 0, derivative in y; axis 0 the mirror
  auto H = o.axis_series(axis, axis == 1 ? y : x);
  auto dH = o.axis_series(axis, axis == 1 ? y : x, true);
  const JumpMeasure& own = axis == 1 ? m.mu1 : m.mu2;    // the boundary whose corner it is
  const JumpMeasure& other = axis == 1 ? m.mu2 : m.mu1;  // the boundary of the series
  int dx = axis == 1 ? 0 : 1, dy = axis == 1 ? 1 : 0;
  double p = own.gf(x, y), dp = own.gf_d(dx, dy, x, y);
  double q = other.gf(x, y) - 1.0, dq = other.gf_d(dx, dy, x, y);
  double d = 1.0 - p;
  for (int j2 = 0; j2 <= b.ky; ++j2)
    for (int j1 = 0; j1 <= b.kx; ++j1) {
      std::size_t i = b.index(j1, j2);
      double L = eval_L(m, j1, j2, x, y, hit.value[i]);
      double dL;
      if (j1 == 0 && j2 == 0)
        dL = m.mu0.gf_d(dx, dy, x, y);
      else if (axis == 1)
        dL = j2 == 0 ? 0.0 : j2 * ipow(x, j1) * ipow(y, j2 - 1);
      else
        dL = j1 == 0 ? 0.0 : j1 * ipow(x, j1 - 1) * ipow(y, j2);
      double N = L + q * H.value[i];
      double dN = exact_sum(std::vector<double>{dL, dq * H.value[i], q * dH.value[i]});
      h.values[i] = (dN * d + N * dp) / (d * d);
      double eN = std::fabs(q) * H.bound[i] + hit.bound[i];
      double edN = std::fabs(dq) * H.bound[i] + std::fabs(q) * dH.bound[i];
      h.bound[i] = (edN * d + eN * std::fabs(dp)) / (d * d);
    }
  return h;
}

}  // namespace

ColumnOracle kappa_oracle(const WalkModel& m, const Geometry& g, KappaKind kind, Box jbox, double tol,
                          std::optional<std::array<double, 2>> point) {
  std::vector<std::array<double, 2>> dom;
  const auto& cp = g.critical();
  switch (kind) {
    case KappaKind::Kappa1: dom.push_back({0.0, kappa_point(g, kind)[1]}); break;
    case KappaKind::Kappa2: dom.push_back({kappa_point(g, kind)[0], 0.0}); break;
    case KappaKind::Kappa1Tilde: {
      // the derivative series needs strict domination
      double y = kappa_point(g, kind)[1];
      dom.push_back({0.0, y + 0.05 * (cp.y_d - y)});
      break;
    }
    case KappaKind::Kappa2Tilde: {
      double x = kappa_point(g, kind)[0];
      dom.push_back({x + 0.05 * (cp.x_d - x), 0.0});
      break;
    }
    case KappaKind::KappaDir:
      if (!point) throw AsymptoticsError(AK::MissingInput, "kappa_dir needs an explicit point");
      check_dir_point(g, (*point)[0], (*point)[1]);
      dom.push_back({(*point)[0], 0.0});
      dom.push_back({0.0, (*point)[1]});
      break;
  }
  return ColumnOracle::adaptive(m, g, jbox, tol, dom);
}

HarmonicFnValues kappa1(const WalkModel& m, const Geometry& g, const ColumnOracle& o) {
  auto p = kappa_point(g, KappaKind::Kappa1);
  return combine(m, o, KappaKind::Kappa1, p[0], p[1], false, true);
}

HarmonicFnValues kappa2(const WalkModel& m, const Geometry& g, const ColumnOracle& o) {
  auto p = kappa_point(g, KappaKind::Kappa2);
  return combine(m, o, KappaKind::Kappa2, p[0], p[1], true, false);
}

HarmonicFnValues kappa_tilde1(const WalkModel& m, const Geometry& g, const ColumnOracle& o) {
  auto p = kappa_point(g, KappaKind::Kappa1Tilde);
  return tilde(m, o, KappaKind::Kappa1Tilde, p[0], p[1], 1);
}

HarmonicFnValues kappa_tilde2(const WalkModel& m, const Geometry& g, const ColumnOracle& o) {
  auto p = kappa_point(g, KappaKind::Kappa2Tilde);
  return tilde(m, o, KappaKind::Kappa2Tilde, p[0], p[1], 0);
}

HarmonicFnValues kappa_dir(const WalkModel& m, const Geometry& g, const ColumnOracle& o, double x,
                           double y) {
  check_dir_point(g, x, y);
  return combine(m, o, KappaKind::KappaDir, x, y, true, true);
}

HarmonicFnValues kappa_values(const WalkModel& m, const Geometry& g, KappaKind kind,
                              const ColumnOracle& o) {
  switch (kind) {
    case KappaKind::Kappa1: return kappa1(m, g, o);
    case KappaKind::Kappa2: return kappa2(m, g, o);
    case KappaKind::Kappa1Tilde: return kappa_tilde1(m, g, o);
    case KappaKind::Kappa2Tilde: return kappa_tilde2(m, g, o);
    case KappaKind::KappaDir: break;
  }
  throw AsymptoticsError(AK::MissingInput, "kappa_dir needs an explicit point");
}

HarmonicityReport check_harmonic(const WalkModel& m, const HarmonicFnValues& k, Box test,
                                 const std::vector<Site>& E0) {
  HarmonicityReport rep;
  rep.min_value = kInf;
  for (int j2 = 0; j2 <= test.ky; ++j2)
    for (int j1 = 0; j1 <= test.kx; ++j1) {
      ExactSum s;
      double err = k.err(j1, j2), mag = std::fabs(k.value(j1, j2));
      for (const auto& e : m.measure_at(j1, j2).entries()) {
        int t1 = j1 + e.dx, t2 = j2 + e.dy;
        if (t1 == 0 && t2 == 0) continue;
        if (!k.box.contains(t1, t2))
          throw AsymptoticsError(AK::MissingInput, "harmonic values must cover one jump beyond the test box");
        s.add(e.mass * k.value(t1, t2));
        err += e.mass * k.err(t1, t2);
        mag += e.mass * std::fabs(k.value(t1, t2));
      }
      s.add(-k.value(j1, j2));
      double res = std::fabs(s.value());
      // rounding of the solves and of the sums
      double bnd = err + 1e-13 * mag;
      double ratio = res / bnd;
      if (res > rep.max_residual) rep.max_residual = res;
      if (ratio > rep.max_ratio) {
        rep.max_ratio = ratio;
        rep.worst = {j1, j2};
      }
      if (res > bnd) rep.within_bound = false;
      bool exceptional = std::find(E0.begin(), E0.end(), Site{j1, j2}) != E0.end();
      if (!exceptional) {
        rep.min_value = std::min(rep.min_value, k.value(j1, j2));
        if (!(k.value(j1, j2) > k.err(j1, j2))) {
          rep.positive = false;
          rep.not_positive.push_back({j1, j2});
        }
      }
    }
  return rep;
}

// ------------------------------------------------------------------------- nu1

namespace {

// coefficients in y of the twisted sums sum_dx x^dx jm(dx, dy), dy = lo..hi
struct Marginal {
  int lo = 0;
  std::vector<double> c;
  double at(int dy) const {
    int i = dy - lo;
    return i >= 0 && i < int(c.size()) ? c[i] : 0.0;
  }
};

Marginal marginal(const JumpMeasure& jm, double x) {
  Marginal r;
  int lo = 0, hi = 0;
  for (const auto& e : jm.entries()) {
    lo = std::min(lo, e.dy);
    hi = std::max(hi, e.dy);
  }
  r.lo = lo;
  std::vector<ExactSum> acc(hi - lo + 1);
  for (const auto& e : jm.entries()) acc[e.dy - lo].add(e.mass * ipow(x, e.dx));
  for (auto& a : acc) r.c.push_back(a.value());
  return r;
}

void require_x_d(const Geometry& g) {
  require_supported(g);
  if (!g.critical().has_dominant)
    throw AsymptoticsError(AK::UndefinedInRegion, "no dominant singularity");
}

}  // namespace

Nu1Sequence nu1_series(const WalkModel& m, const Geometry& g, int N) {
  require_x_d(g);
  double xd = g.critical().x_d;
  auto A = marginal(m.mu, xd);
  auto B = marginal(m.mu1, xd);
  // numerator x_d (phi1(x_d,y) - 1), denominator Q(x_d,y) = x_d y - x_d sum_dy A(dy) y^(dy+1)
  int dn = int(B.c.size()) - 1 + B.lo;
  std::vector<double> num(std::max(dn, 0) + 1, 0.0);
  for (int d = 0; d <= dn; ++d) num[d] = xd * B.at(d);
  num[0] -= xd;
  int dq = int(A.c.size()) + A.lo;
  std::vector<double> den(std::max(dq, 1) + 1, 0.0);
  for (int d = A.lo; d < A.lo + int(A.c.size()); ++d) den[d + 1] -= xd * A.at(d);
  den[1] += xd;
  if (x_pole_cancels(g)) {
    // the common root Y1(x_d) would otherwise leave a spurious pole of size
    // O(rounding) growing like Y1(x_d)^-n
    double r = g.Y1(xd);
    num = deflate(num, r);
    den = deflate(den, r);
    if (num.empty()) num.push_back(0.0);
  }
  Nu1Sequence out;
  out.method = Nu1Method::SeriesDivision;
  out.coeffs.assign(N + 1, 0.0);
  out.coeffs[0] = 1.0;
  std::vector<double> c(N, 0.0);
  for (int n = 0; n < N; ++n) {
    ExactSum s;
    if (n < int(num.size())) s.add(num[n]);
    for (int i = 1; i <= n && i < int(den.size()); ++i) s.add(-den[i] * c[n - i]);
    c[n] = s.value() / den[0];
    out.coeffs[n + 1] = c[n];
  }
  return out;
}

Nu1Sequence nu1_twisted(const WalkModel& m, const Geometry& g, int N) {
  require_x_d(g);
  double xd = g.critical().x_d;
  double Y = g.Y1(xd);
  auto A = marginal(m.mu, xd);
  auto B = marginal(m.mu1, xd);
  int J = int(A.c.size()) + A.lo - 1;  // largest up-jump of mu
  int JB = int(B.c.size()) + B.lo - 1;
  double loss0 = x_pole_cancels(g) ? 0.0 : std::max(0.0, 1.0 - m.mu1.gf(xd, Y));
  Nu1Sequence out;
  out.method = Nu1Method::TwistedInvariant;
  out.coeffs.assign(N + 1, 0.0);
  out.coeffs[0] = 1.0;
  auto& nu = out.coeffs;
  // cut between levels <= l and > l, divided by Y^l:
  // nu(l+1) A(-1) = loss0 Y^-l + sum_{k>l} Y^(k-l) B(k)
  //                 + sum_{1<=a<=l} nu(a) sum_{d>l-a} Y^(a+d-l) A(d)
  for (int l = 0; l < N; ++l) {
    ExactSum s;
    if (loss0 > 0) s.add(loss0 * ipow(Y, -l));
    for (int k = l + 1; k <= JB; ++k) s.add(ipow(Y, k - l) * B.at(k));
    for (int a = std::max(1, l - J + 1); a <= l; ++a)
      for (int d = l - a + 1; d <= J; ++d) s.add(nu[a] * ipow(Y, a + d - l) * A.at(d));
    nu[l + 1] = s.value() / A.at(-1);
  }
  return out;
}

double nu1_balance_residual(const WalkModel& m, const Geometry& g, const Nu1Sequence& nu) {
  double xd = g.critical().x_d;
  auto A = marginal(m.mu, xd);
  auto B = marginal(m.mu1, xd);
  const auto& v = nu.coeffs;
  double worst = 0;
  for (int n = 0; n + 1 < int(v.size()); ++n) {
    ExactSum s;
    double mag = std::fabs(v[n]);
    s.add(v[n]);
    s.add(-B.at(n));
    mag += std::fabs(B.at(n));
    for (int l2 = 1; l2 <= n + 1; ++l2) {
      double t = v[l2] * A.at(n - l2);
      s.add(-t);
      mag += std::fabs(t);
    }
    worst = std::max(worst, std::fabs(s.value()) / mag);
  }
  return worst;
}

// ----------------------------------------------------------- branch derivatives

BranchDerivatives branch_chain_derivatives(const WalkModel& m, const Geometry& g) {
  require_x_d(g);
  const auto& cp = g.critical();
  const auto& lab = g.region();
  BranchDerivatives d;
  d.x_d = cp.x_d;
  d.y_d = cp.y_d;
  d.Y1_xd = g.Y1(cp.x_d);
  d.X1_yd = g.X1(cp.y_d);
  if (!lab.xd_at_corner) {
    d.dphi1_dx = g.xside().dbranch_phi(cp.x_d);
    d.dY1_dx = g.dY1(cp.x_d);
  }
  if (!lab.yd_at_corner) {
    d.dphi2_dy = g.yside().dbranch_phi(cp.y_d);
    d.dX1_dy = g.dX1(cp.y_d);
  }
  double x = cp.x_d, y = d.Y1_xd;
  d.Px_x = m.mu.gf_d(1, 0, x, y);
  d.Py_x = m.mu.gf_d(0, 1, x, y);
  d.Pyy_x = m.mu.gf_d(0, 2, x, y);
  d.dyphi1_x = m.mu1.gf_d(0, 1, x, y);
  x = d.X1_yd;
  y = cp.y_d;
  d.Px_y = m.mu.gf_d(1, 0, x, y);
  d.Py_y = m.mu.gf_d(0, 1, x, y);
  d.Pxx_y = m.mu.gf_d(2, 0, x, y);
  d.dxphi2_y = m.mu2.gf_d(1, 0, x, y);
  {
    double xp = cp.xP_star2, yp = g.Y1(xp);
    d.corner_cx = std::sqrt(2.0 * m.mu.gf_d(1, 0, xp, yp) / m.mu.gf_d(0, 2, xp, yp));
  }
  {
    double yp = cp.yP_star2, xp = g.X1(yp);
    d.corner_cy = std::sqrt(2.0 * m.mu.gf_d(0, 1, xp, yp) / m.mu.gf_d(2, 0, xp, yp));
  }
  return d;
}

// --------------------------------------------------------------------- constants

double ConstantSet::at(const std::string& n) const {
  auto it = value.find(n);
  if (it == value.end())
    throw AsymptoticsError(AK::UndefinedInRegion, fmt::format("constant {} undefined here", n));
  return it->second;
}

ConstantSet constants_theorem2(const WalkModel& m, const Geometry& g) {
  require_x_d(g);
  const auto& cp = g.critical();
  const auto& lab = g.region();
  auto d = branch_chain_derivatives(m, g);
  Region r = lab.region;
  ConstantSet s;
  double xd = cp.x_d, yd = cp.y_d;
  if (in(r, {Region::B0, Region::B1, Region::B3, Region::B4}) || (r == Region::B2 && !lab.xd_at_corner))
    s.value["a1"] = 1.0 / d.dphi1_dx;
  if (r == Region::B2 && lab.xd_at_corner) {
    double c = d.corner_cx, c_printed = c / std::sqrt(2.0);
    if (lab.phi1_corner_eq_one) {
      s.value["a2"] = 1.0 / (d.dyphi1_x * c);
      s.printed["a2"] = 1.0 / (d.dyphi1_x * c_printed);
    } else {
      s.value["a3"] = c / 2.0;
      s.printed["a3"] = c_printed / 2.0;
    }
  }
  if (r == Region::B5) {
    double f2 = m.mu2.gf(xd, yd) - 1.0;
    if (!lab.xd_at_corner) {
      s.value["a4"] = f2 / (d.dphi1_dx * d.dphi2_dy * d.dY1_dx);
    } else {
      double c = d.corner_cx;
      if (lab.phi1_corner_eq_one) {
        s.value["a5"] = f2 / (d.dyphi1_x * c * c * d.dphi2_dy);
        s.printed["a5"] = f2 * d.Pyy_x / (d.dyphi1_x * d.Px_x * d.dphi2_dy);
      } else {
        double f1 = m.mu1.gf(xd, yd);
        s.value["a6"] = f2 / ((1.0 - f1) * d.dphi2_dy * c);
        s.printed["a6"] = f2 * std::sqrt(d.Pyy_x / d.Px_x) / ((1.0 - f1) * d.dphi2_dy);
      }
    }
  }
  if (r == Region::B6) {
    double f2 = m.mu2.gf(xd, yd) - 1.0, f1 = m.mu1.gf(xd, yd);
    s.value["a7"] = f2 / ((1.0 - f1) * d.dphi2_dy * d.dY1_dx);
  }
  return s;
}

ConstantSet constants_theorem4(const WalkModel& m, const Geometry& g) {
  require_x_d(g);
  const auto& cp = g.critical();
  const auto& lab = g.region();
  const auto& part = g.partition();
  auto d = branch_chain_derivatives(m, g);
  Region r = lab.region;
  double xd = cp.x_d, yd = cp.y_d;
  ConstantSet s;
  if (!part.W1_empty && !lab.xd_at_corner) {
    double Y2 = g.Y2(xd);
    double c1 = (m.mu1.gf(xd, Y2) - 1.0) / m.mu.gf_d(0, 1, xd, Y2);
    s.value["c1"] = c1;
    s.value["b1"] = c1 / d.dphi1_dx;
  }
  if (!part.W2_empty && !lab.yd_at_corner) {
    double X2 = g.X2(yd);
    double c2 = (m.mu2.gf(X2, yd) - 1.0) / m.mu.gf_d(1, 0, X2, yd);
    s.value["c2"] = c2;
    s.value["b2"] = c2 / d.dphi2_dy;
  }
  if (r == Region::B3 && !lab.yd_at_corner) {
    s.value["b3"] = xd * (m.mu1.gf(xd, yd) - 1.0) /
                    (m.mu.gf_d(0, 1, xd, yd) * d.dphi2_dy * d.dphi1_dx * d.dX1_dy);
  }
  if (r == Region::B5 && !lab.xd_at_corner) {
    s.value["b4"] = yd * (m.mu2.gf(xd, yd) - 1.0) /
                    (m.mu.gf_d(1, 0, xd, yd) * d.dphi1_dx * d.dphi2_dy * d.dY1_dx);
  }
  return s;
}

TwistedMoments twisted_moments(const WalkModel& m, const Geometry& g, std::array<double, 2> w) {
  double n = std::hypot(w[0], w[1]);
  TwistedMoments t;
  t.w = {w[0] / n, w[1] / n};
  auto [x, y] = g.point_of_direction(t.w[0], t.w[1]);
  t.x = x;
  t.y = y;
  t.mass = m.mu.gf(x, y);
  t.m = {m.mu.moment(1, 0, x, y), m.mu.moment(0, 1, x, y)};
  double q12 = m.mu.moment(1, 1, x, y);
  t.Q = {{{m.mu.moment(2, 0, x, y), q12}, {q12, m.mu.moment(0, 2, x, y)}}};
  return t;
}

// ------------------------------------------------------------------ predictions

const HarmonicFnValues* KappaSet::find_dir(double x, double y) const {
  for (const auto& h : dir)
    if (std::fabs(h.x - x) <= 1e-9 * x && std::fabs(h.y - y) <= 1e-9 * y) return &h;
  return nullptr;
}

AsymptoticContext build_context(const WalkModel& m, const Geometry& g, const ContextOptions& opt) {
  require_x_d(g);
  AsymptoticContext ctx;
  ctx.a = constants_theorem2(m, g);
  ctx.b = constants_theorem4(m, g);
  ctx.nu1 = nu1_series(m, g, opt.nu_terms);
  Box jb{opt.j_side, opt.j_side};
  auto attempt = [&](KappaKind kind, std::optional<HarmonicFnValues>& slot) {
    try {
      kappa_point(g, kind);
    } catch (const AsymptoticsError&) {
      return;
    }
    auto o = kappa_oracle(m, g, kind, jb, opt.tol);
    slot = kappa_values(m, g, kind, o);
  };
  attempt(KappaKind::Kappa1, ctx.kappas.kappa1);
  attempt(KappaKind::Kappa2, ctx.kappas.kappa2);
  if (opt.with_tilde) {
    attempt(KappaKind::Kappa1Tilde, ctx.kappas.kappa1_tilde);
    attempt(KappaKind::Kappa2Tilde, ctx.kappas.kappa2_tilde);
  }
  return ctx;
}

void add_direction_kappa(const WalkModel& m, const Geometry& g, AsymptoticContext& ctx,
                         std::array<double, 2> w, const ContextOptions& opt) {
  if (g.classify_direction(w[0], w[1]) != DirectionClass::W0) return;
  auto [x, y] = g.point_of_direction(w[0] / std::hypot(w[0], w[1]), w[1] / std::hypot(w[0], w[1]));
  if (ctx.kappas.find_dir(x, y)) return;
  auto o = kappa_oracle(m, g, KappaKind::KappaDir, Box{opt.j_side, opt.j_side}, opt.tol,
                        std::array<double, 2>{x, y});
  ctx.kappas.dir.push_back(kappa_dir(m, g, o, x, y));
}

namespace {

double kappa_at(const std::optional<HarmonicFnValues>& h, const char* name, Site j) {
  if (!h) throw AsymptoticsError(AK::MissingInput, fmt::format("{} not computed", name));
  if (!h->box.contains(j[0], j[1]))
    throw AsymptoticsError(AK::MissingInput, fmt::format("{} not computed at ({}, {})", name, j[0], j[1]));
  return h->value(j[0], j[1]);
}

PredictionTerm term(double constant, double rate_x, double rate_y, double poly, PolyOf of, Site k) {
  PredictionTerm t;
  t.constant = constant;
  t.rate_x = rate_x;
  t.rate_y = rate_y;
  t.poly_power = poly;
  t.poly_of = of;
  double n = of == PolyOf::K1 ? k[0] : of == PolyOf::K2 ? k[1] : std::hypot(double(k[0]), double(k[1]));
  double lv = std::log(std::fabs(constant)) + k[0] * std::log(rate_x) + k[1] * std::log(rate_y);
  if (poly != 0) lv += poly * std::log(n);
  t.value = constant == 0 ? 0.0 : std::copysign(std::exp(lv), constant);
  return t;
}

void finish(AsymptoticPrediction& p) {
  double s = 0;
  for (const auto& t : p.terms) s += t.value;
  p.value = s;
}

}  // namespace

AsymptoticPrediction predict_axis(const Geometry& g, const AsymptoticContext& ctx, Site j, int k1,
                                  int k2) {
  require_x_d(g);
  const auto& lab = g.region();
  const auto& cp = g.critical();
  if (k2 < 0 || k2 >= int(ctx.nu1.coeffs.size()))
    throw AsymptoticsError(AK::MissingInput, "nu1 not computed that far");
  double xd = cp.x_d, nu = ctx.nu1.coeffs[k2];
  Site k{k1, k2};
  AsymptoticPrediction p;
  p.j = j;
  p.k = k;
  const double rpi = std::sqrt(M_PI * xd);
  switch (lab.region) {
    case Region::B0:
    case Region::B1:
    case Region::B3:
    case Region::B4:
    case Region::B2:
      if (lab.region != Region::B2 || !lab.xd_at_corner) {
        p.regime = Regime::AxisSimplePole;
        p.formula = "a1 nu1(k2) kappa1(j) x_d^(-k1-1)";
        double c = ctx.a.at("a1") * nu * kappa_at(ctx.kappas.kappa1, "kappa1", j) / xd;
        p.terms.push_back(term(c, 1 / xd, 1, 0, PolyOf::K1, k));
      } else if (lab.phi1_corner_eq_one) {
        p.regime = Regime::AxisSquareRoot;
        p.formula = "a2 nu1(k2) kappa1(j) x_d^-k1 / sqrt(pi k1 x_d)";
        double kap = kappa_at(ctx.kappas.kappa1, "kappa1", j);
        p.terms.push_back(term(ctx.a.at("a2") * nu * kap / rpi, 1 / xd, 1, -0.5, PolyOf::K1, k));
        p.printed_value = term(ctx.a.printed.at("a2") * nu * kap / rpi, 1 / xd, 1, -0.5, PolyOf::K1, k).value;
      } else {
        p.regime = Regime::AxisSquareRootTilde;
        p.formula = "a3 nu1(k2) tilde-kappa1(j) x_d^(-k1+1) / (k1 sqrt(pi k1 x_d))";
        double kap = kappa_at(ctx.kappas.kappa1_tilde, "kappa1_tilde", j);
        p.terms.push_back(term(ctx.a.at("a3") * nu * kap * xd / rpi, 1 / xd, 1, -1.5, PolyOf::K1, k));
        p.printed_value = term(ctx.a.printed.at("a3") * nu * kap / rpi, 1 / xd, 1, -1.5, PolyOf::K1, k).value;
      }
      break;
    case Region::B5: {
      double kap = kappa_at(ctx.kappas.kappa2, "kappa2", j);
      if (!lab.xd_at_corner) {
        p.regime = Regime::AxisDoublePole;
        p.formula = "a4 nu1(k2) kappa2(j) k1 x_d^(-k1-2)";
        p.terms.push_back(term(ctx.a.at("a4") * nu * kap / (xd * xd), 1 / xd, 1, 1, PolyOf::K1, k));
      } else if (lab.phi1_corner_eq_one) {
        p.regime = Regime::AxisCornerPole;
        p.formula = "a5 nu1(k2) kappa2(j) x_d^(-k1-1)";
        p.terms.push_back(term(ctx.a.at("a5") * nu * kap / xd, 1 / xd, 1, 0, PolyOf::K1, k));
        p.printed_value = term(ctx.a.printed.at("a5") * nu * kap / xd, 1 / xd, 1, 0, PolyOf::K1, k).value;
      } else {
        p.regime = Regime::AxisCornerSquareRoot;
        p.formula = "a6 nu1(k2) kappa2(j) x_d^-k1 / sqrt(pi k1 x_d)";
        p.terms.push_back(term(ctx.a.at("a6") * nu * kap / rpi, 1 / xd, 1, -0.5, PolyOf::K1, k));
        p.printed_value = term(ctx.a.printed.at("a6") * nu * kap / rpi, 1 / xd, 1, -0.5, PolyOf::K1, k).value;
      }
      break;
    }
    case Region::B6: {
      p.regime = Regime::AxisSimplePoleKappa2;
      p.formula = "a7 nu1(k2) kappa2(j) x_d^(-k1-1)";
      double kap = kappa_at(ctx.kappas.kappa2, "kappa2", j);
      p.terms.push_back(term(ctx.a.at("a7") * nu * kap / xd, 1 / xd, 1, 0, PolyOf::K1, k));
      break;
    }
    case Region::B7:
      throw AsymptoticsError(AK::UnsupportedRegion, "region B7 unsupported for asymptotics");
  }
  finish(p);
  return p;
}

AsymptoticPrediction predict_direction(const WalkModel& m, const Geometry& g,
                                       const AsymptoticContext& ctx, Site j, Site k) {
  require_x_d(g);
  if (k[0] < 0 || k[1] < 0 || (k[0] == 0 && k[1] == 0))
    throw AsymptoticsError(AK::MissingInput, "k must be a nonzero point of the quadrant");
  const auto& cp = g.critical();
  double xd = cp.x_d, yd = cp.y_d;
  AsymptoticPrediction p;
  p.j = j;
  p.k = k;
  auto w1 = [&] {
    double Y2 = g.Y2(xd);
    return term(ctx.b.at("b1") * kappa_at(ctx.kappas.kappa1, "kappa1", j) / (xd * Y2), 1 / xd, 1 / Y2,
                0, PolyOf::K1, k);
  };
  auto w2 = [&] {
    double X2 = g.X2(yd);
    return term(ctx.b.at("b2") * kappa_at(ctx.kappas.kappa2, "kappa2", j) / (X2 * yd), 1 / X2, 1 / yd,
                0, PolyOf::K1, k);
  };
  switch (g.classify_direction(k[0], k[1])) {
    case DirectionClass::W1:
      p.regime = Regime::DirectionW1;
      p.formula = "b1 kappa1(j) x_d^(-k1-1) Y2(x_d)^(-k2-1)";
      p.terms.push_back(w1());
      break;
    case DirectionClass::W2:
      p.regime = Regime::DirectionW2;
      p.formula = "b2 kappa2(j) X2(y_d)^(-k1-1) y_d^(-k2-1)";
      p.terms.push_back(w2());
      break;
    case DirectionClass::Critical:
      p.regime = Regime::DirectionCritical;
      p.formula = "b1 kappa1(j) x_d^(-k1-1) Y2(x_d)^(-k2-1) + b2 kappa2(j) X2(y_d)^(-k1-1) y_d^(-k2-1)";
      p.terms.push_back(w1());
      p.terms.push_back(w2());
      break;
    case DirectionClass::Competition: {
      if (g.region().region == Region::B3) {
        p.regime = Regime::DirectionCompetitionY;
        p.formula = "kappa1(j) (b1 x_d^(-k1-1) + b3 X2(y_d)^(-k1-1) y_d^-1 k2) y_d^(-k2-1)";
        double kap = kappa_at(ctx.kappas.kappa1, "kappa1", j), X2 = g.X2(yd);
        p.terms.push_back(term(ctx.b.at("b1") * kap / (xd * yd), 1 / xd, 1 / yd, 0, PolyOf::K1, k));
        p.terms.push_back(term(ctx.b.at("b3") * kap / (X2 * yd * yd), 1 / X2, 1 / yd, 1, PolyOf::K2, k));
      } else {
        p.regime = Regime::DirectionCompetitionX;
        p.formula = "kappa2(j) x_d^(-k1-1) (b4 k1 x_d^-1 Y2(x_d)^(-k2-2) + b2 y_d^(-k2-1))";
        double kap = kappa_at(ctx.kappas.kappa2, "kappa2", j), Y2 = g.Y2(xd);
        p.terms.push_back(term(ctx.b.at("b4") * kap / (xd * xd * Y2 * Y2), 1 / xd, 1 / Y2, 1, PolyOf::K1, k));
        p.terms.push_back(term(ctx.b.at("b2") * kap / (xd * yd), 1 / xd, 1 / yd, 0, PolyOf::K1, k));
      }
      break;
    }
    case DirectionClass::W0: {
      p.regime = Regime::DirectionW0;
      p.formula = "kappa_(x_D,y_D)(j) / (sqrt(2 pi |k|) |m|^(1/2) sqrt(w' Q w') x_D^k1 y_D^k2)";
      auto tm = twisted_moments(m, g, {double(k[0]), double(k[1])});
      const auto* kd = ctx.kappas.find_dir(tm.x, tm.y);
      if (!kd)
        throw AsymptoticsError(AK::MissingInput, "kappa_dir not computed for this direction");
      if (!kd->box.contains(j[0], j[1]))
        throw AsymptoticsError(AK::MissingInput, "kappa_dir not computed at this j");
      double kap = kd->value(j[0], j[1]);
      double u = tm.w[0], v = tm.w[1];
      double s2 = v * v * tm.Q[0][0] - 2 * u * v * tm.Q[0][1] + u * u * tm.Q[1][1];
      double mn = std::hypot(tm.m[0], tm.m[1]);
      double base = kap / std::sqrt(2 * M_PI);
      p.terms.push_back(term(base / (std::sqrt(mn) * std::sqrt(s2)), 1 / tm.x, 1 / tm.y, -0.5, PolyOf::Norm, k));
      p.printed_value = term(base * mn * std::sqrt(s2), 1 / tm.x, 1 / tm.y, -0.5, PolyOf::Norm, k).value;
      break;
    }
    case DirectionClass::Singular:
      throw AsymptoticsError(AK::SingularDirection,
                             fmt::format("direction ({}, {}) is singular: no asymptotics available", k[0], k[1]));
  }
  finish(p);
  return p;
}

double martin_prediction(const WalkModel& m, const Geometry& g, const AsymptoticContext& ctx, Site j,
                         Site k) {
  auto pj = predict_direction(m, g, ctx, j, k);
  auto p0 = predict_direction(m, g, ctx, Site{0, 0}, k);
  return pj.value / p0.value;
}

namespace {

// value at 0 of the interpolating polynomial and its weights
std::pair<double, std::vector<double>> lagrange_at_zero(const std::vector<double>& u,
                                                        const std::vector<double>& f) {
  std::vector<double> w(u.size(), 1.0);
  double v = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t l = 0; l < u.size(); ++l)
      if (l != i) w[i] *= u[l] / (u[l] - u[i]);
    v += w[i] * f[i];
  }
  return {v, w};
}

}  // namespace

std::vector<AxisLimit> axis_limits(const WalkModel& m, const Geometry& g, const AsymptoticContext& ctx,
                                   const std::vector<Site>& js, const AxisLimitOptions& opt) {
  require_x_d(g);
  const auto& lab = g.region();
  const double xd = g.critical().x_d;
  double power = 1;
  std::string constant;
  bool use_kappa2 = false;
  switch (lab.region) {
    case Region::B0:
    case Region::B1:
    case Region::B3:
    case Region::B4:
    case Region::B2:
      if (lab.region != Region::B2 || !lab.xd_at_corner) {
        constant = "a1";
      } else if (lab.phi1_corner_eq_one) {
        constant = "a2";
        power = 0.5;
      } else {
        throw AsymptoticsError(AK::UndefinedInRegion, "H_j(x,0) stays bounded at x_d in this case");
      }
      break;
    case Region::B5:
      use_kappa2 = true;
      if (!lab.xd_at_corner) {
        constant = "a4";
        power = 2;
      } else if (lab.phi1_corner_eq_one) {
        constant = "a5";
      } else {
        constant = "a6";
        power = 0.5;
      }
      break;
    case Region::B6:
      use_kappa2 = true;
      constant = "a7";
      break;
    case Region::B7:
      throw AsymptoticsError(AK::UnsupportedRegion, "region B7 unsupported for asymptotics");
  }
  const double a = ctx.a.at(constant);
  const auto& kap = use_kappa2 ? ctx.kappas.kappa2 : ctx.kappas.kappa1;
  const char* kname = use_kappa2 ? "kappa2" : "kappa1";

  Box jbox{0, 0};
  for (auto j : js) {
    jbox.kx = std::max(jbox.kx, j[0]);
    jbox.ky = std::max(jbox.ky, j[1]);
  }
  const double gap = std::max(0.0, g.critical().xP_star2 - xd);

  // In B5 and B6 the pole of H_j(x,0) comes from H_j(0,y) at y = Y1(x), that
  // is from paths far up the y-axis, which no strip of feasible size holds.
  // There H_j(x,0) is rebuilt on the kernel curve,
  //   (1 - phi1) H_j(x,0) = L_j + (phi2 - 1) H_j(0,y),  y = Y1(x),
  // from the y-axis series of a tall narrow box.
  auto series_at = [&](const std::vector<double>& xs) {
    std::vector<BoundedVec> series;
    if (!use_kappa2) {
      // the strip widens with the finest node
      Box strip = opt.strip;
      strip.kx = int(std::ldexp(double(strip.kx), std::max(0, int(xs.size()) - 5)));
      ColumnOracle o(m, g, jbox, strip, {{xs.back(), 0.0}});
      for (double x : xs) series.push_back(o.axis_series(0, x));
      return series;
    }
    auto o = ColumnOracle::adaptive(m, g, jbox, 1e-11, {{0.0, g.Y1(xs.back())}});
    auto hit = o.hitting();
    for (double x : xs) {
      double y = g.Y1(x);
      auto hy = o.axis_series(1, y);
      double d = 1.0 - m.mu1.gf(x, y), f2 = m.mu2.gf(x, y) - 1.0;
      BoundedVec h;
      for (std::size_t i = 0; i < jbox.size(); ++i) {
        int j1 = int(i % (jbox.kx + 1)), j2 = int(i / (jbox.kx + 1));
        double L = eval_L(m, j1, j2, x, y, hit.value[i]);
        h.value.push_back((L + f2 * hy.value[i]) / d);
        h.bound.push_back((hit.bound[i] + std::fabs(f2) * hy.bound[i]) / std::fabs(d));
      }
      series.push_back(std::move(h));
    }
    return series;
  };

  std::vector<AxisLimit> out;
  for (int n = std::max(opt.min_nodes, 2);; ++n) {
    std::vector<double> xs, hs, u;
    for (int i = 1; i <= n; ++i) {
      hs.push_back(xd * 0.2 * std::ldexp(1.0, -i));
      xs.push_back(xd - hs.back());
      u.push_back(std::sqrt(gap + hs.back()) - std::sqrt(gap));
    }
    auto series = series_at(xs);
    out.clear();
    bool converged = true;
    for (auto j : js) {
      AxisLimit L;
      L.regime = predict_axis(g, ctx, j, 1, 0).regime;
      L.j = j;
      L.power = power;
      L.branch_gap = gap;
      L.x = xs;
      std::size_t idx = jbox.index(j[0], j[1]);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        double s = std::pow(hs[i], power);
        L.sample.push_back(s * series[i].value[idx]);
        L.sample_bound.push_back(s * series[i].bound[idx]);
      }
      L.richardson = richardson(L.sample, 2);
      auto [v, w] = lagrange_at_zero(u, L.sample);
      L.extrapolated = v;
      for (std::size_t i = 0; i < w.size(); ++i) L.bound += std::fabs(w[i]) * L.sample_bound[i];
      std::vector<double> u1(u.begin() + 1, u.end()), f1(L.sample.begin() + 1, L.sample.end());
      L.spread = std::fabs(v - lagrange_at_zero(u1, f1).first);
      L.target = a * kappa_at(kap, kname, j);
      if (!(L.spread <= opt.spread_tol * std::fabs(v))) converged = false;
      out.push_back(std::move(L));
    }
    if (converged || n >= opt.max_nodes) break;
  }
  return out;
}

void write_prediction_csv(std::ostream& out, const std::vector<PredictionRow>& rows) {
  out << "k1,k2,regime,predicted,oracle,ratio,bound\n";
  for (const auto& r : rows)
    out << r.k[0] << ',' << r.k[1] << ',' << r.regime << ',' << fmt_full(r.predicted) << ','
        << fmt_full(r.oracle) << ',' << fmt_full(r.ratio) << ',' << fmt_full(r.bound) << '\n';
}

}  // namespace qwalk
