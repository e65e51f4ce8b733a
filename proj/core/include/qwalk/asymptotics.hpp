#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qwalk/geometry.hpp"
#include "qwalk/green.hpp"
#include "qwalk/model.hpp"

namespace qwalk {

class AsymptoticsError : public std::runtime_error {
 public:
  enum class Kind { UndefinedInRegion, NotOnS22, SingularDirection, UnsupportedRegion, MissingInput };
  AsymptoticsError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// ------------------------------------------------------------ harmonic functions

enum class KappaKind { Kappa1, Kappa2, Kappa1Tilde, Kappa2Tilde, KappaDir };
const char* kappa_kind_name(KappaKind k);

struct HarmonicFnValues {
  KappaKind kind = KappaKind::Kappa1;
  double x = 0, y = 0;  // evaluation point
  Box box;              // j in [0,kx] x [0,ky], k2-major
  std::vector<double> values;
  std::vector<double> bound;

  double value(int j1, int j2) const { return values[box.index(j1, j2)]; }
  double err(int j1, int j2) const { return bound[box.index(j1, j2)]; }
};

// Evaluation point of each kind for the model; throws UndefinedInRegion.
std::array<double, 2> kappa_point(const Geometry& g, KappaKind kind);

// Oracle whose certificate dominates the series a kind needs, for j in jbox.
ColumnOracle kappa_oracle(const WalkModel& m, const Geometry& g, KappaKind kind, Box jbox,
                          double tol = 1e-11, std::optional<std::array<double, 2>> point = {});

// L_j + (phi2 - 1) H_j(0, Y1(x_d)) at (x_d, Y1(x_d))
HarmonicFnValues kappa1(const WalkModel& m, const Geometry& g, const ColumnOracle& o);
// L_j + (phi1 - 1) H_j(X1(y_d), 0) at (X1(y_d), y_d)
HarmonicFnValues kappa2(const WalkModel& m, const Geometry& g, const ColumnOracle& o);
// d/dy of (L_j + (phi2 - 1) H_j(0,y)) / (1 - phi1) at (x**_P, Y1(x**_P))
HarmonicFnValues kappa_tilde1(const WalkModel& m, const Geometry& g, const ColumnOracle& o);
HarmonicFnValues kappa_tilde2(const WalkModel& m, const Geometry& g, const ColumnOracle& o);
// L_j + (phi1 - 1) H_j(x,0) + (phi2 - 1) H_j(0,y) at a point of S22 below (x_d, y_d)
HarmonicFnValues kappa_dir(const WalkModel& m, const Geometry& g, const ColumnOracle& o, double x,
                           double y);
HarmonicFnValues kappa_values(const WalkModel& m, const Geometry& g, KappaKind kind,
                              const ColumnOracle& o);

struct HarmonicityReport {
  double max_residual = 0;
  double max_ratio = 0;  // max residual / bound
  Site worst{0, 0};
  bool within_bound = true;
  bool positive = true;  // value > bound at every tested j outside E0
  double min_value = 0;
  std::vector<Site> not_positive;
};

// |E_j[kappa(Z(1)); Z(1) != 0] - kappa(j)| over j in test, which needs the
// values one jump beyond the test box
HarmonicityReport check_harmonic(const WalkModel& m, const HarmonicFnValues& k, Box test,
                                 const std::vector<Site>& E0);

// ------------------------------------------------------------------------- nu1

enum class Nu1Method { SeriesDivision, TwistedInvariant };

struct Nu1Sequence {
  std::vector<double> coeffs;  // nu1(0..N)
  Nu1Method method = Nu1Method::SeriesDivision;
};

// coefficient n-1 of x_d (phi1(x_d,y) - 1) / Q(x_d,y), nu1(0) = 1
Nu1Sequence nu1_series(const WalkModel& m, const Geometry& g, int N);
// invariant measure of the twisted height chain, normalized at 0 and
// rescaled by Y1(x_d)^-n
Nu1Sequence nu1_twisted(const WalkModel& m, const Geometry& g, int N);
// max over n < N of the relative residual of
//   nu1(n) = sum_l1 x_d^l1 mu1(l1,n) + sum_{l2=1}^{n+1} nu1(l2) sum_l1 x_d^l1 mu(l1,n-l2)
double nu1_balance_residual(const WalkModel& m, const Geometry& g, const Nu1Sequence& nu);

// ----------------------------------------------------------- branch derivatives

struct BranchDerivatives {
  double x_d = 0, y_d = 0;
  double Y1_xd = 0, X1_yd = 0;
  double dphi1_dx = NAN;  // d/dx phi1(x, Y1(x)) at x_d
  double dphi2_dy = NAN;  // d/dy phi2(X1(y), y) at y_d
  double dY1_dx = NAN;    // Y1'(x_d), NaN at a branch point
  double dX1_dy = NAN;
  // partials of P, phi1 at (x_d, Y1(x_d)) and of P, phi2 at (X1(y_d), y_d)
  double Px_x = 0, Py_x = 0, Pyy_x = 0, dyphi1_x = 0;
  double Px_y = 0, Py_y = 0, Pxx_y = 0, dxphi2_y = 0;
  // Y1(x**_P) - Y1(x) ~ cx sqrt(x**_P - x) with cx = sqrt(2 Px / Pyy) at the corner
  double corner_cx = 0, corner_cy = 0;
};

BranchDerivatives branch_chain_derivatives(const WalkModel& m, const Geometry& g);

// --------------------------------------------------------------------- constants

struct ConstantSet {
  std::map<std::string, double> value;
  // the displayed closed form where it differs from the value used
  std::map<std::string, double> printed;
  bool has(const std::string& n) const { return value.count(n) != 0; }
  double at(const std::string& n) const;
};

ConstantSet constants_theorem2(const WalkModel& m, const Geometry& g);
ConstantSet constants_theorem4(const WalkModel& m, const Geometry& g);

struct TwistedMoments {
  std::array<double, 2> w{};
  double x = 0, y = 0;  // (x_D(w), y_D(w))
  double mass = 0;
  std::array<double, 2> m{};
  std::array<std::array<double, 2>, 2> Q{};
};

TwistedMoments twisted_moments(const WalkModel& m, const Geometry& g, std::array<double, 2> w);

// ------------------------------------------------------------------ predictions

enum class Regime {
  AxisSimplePole,         // a1 nu1 kappa1 x_d^(-k1-1)
  AxisSquareRoot,         // a2 nu1 kappa1 x_d^-k1 / sqrt(pi k1 x_d)
  AxisSquareRootTilde,    // a3 nu1 tilde-kappa1 x_d^(-k1+1) / (k1 sqrt(pi k1 x_d))
  AxisDoublePole,         // a4 nu1 kappa2 k1 x_d^(-k1-2)
  AxisCornerPole,         // a5 nu1 kappa2 x_d^(-k1-1)
  AxisCornerSquareRoot,   // a6 nu1 kappa2 x_d^-k1 / sqrt(pi k1 x_d)
  AxisSimplePoleKappa2,   // a7 nu1 kappa2 x_d^(-k1-1)
  DirectionW1,
  DirectionW2,
  DirectionCritical,
  DirectionCompetitionY,  // direction (0,1) with a double pole in y
  DirectionCompetitionX,  // direction (1,0) with a double pole in x
  DirectionW0
};
const char* regime_name(Regime r);

enum class PolyOf { K1, K2, Norm };

struct PredictionTerm {
  double constant = 0;  // value = constant * n^poly_power * rate_x^k1 * rate_y^k2
  double rate_x = 1, rate_y = 1;
  double poly_power = 0;
  PolyOf poly_of = PolyOf::K1;  // n is k1, k2 or |k|
  double value = 0;
};

struct AsymptoticPrediction {
  Regime regime = Regime::AxisSimplePole;
  std::string formula;
  Site j{0, 0};
  Site k{0, 0};
  std::vector<PredictionTerm> terms;
  double value = 0;
  // the displayed closed form where it differs from value, NaN otherwise
  double printed_value = NAN;

  const PredictionTerm& leading() const { return terms.front(); }
};

struct KappaSet {
  std::optional<HarmonicFnValues> kappa1, kappa2, kappa1_tilde, kappa2_tilde;
  std::vector<HarmonicFnValues> dir;
  // kappa_(x,y) for a point of S22, matched within 1e-9
  const HarmonicFnValues* find_dir(double x, double y) const;
};

struct AsymptoticContext {
  ConstantSet a, b;
  Nu1Sequence nu1;
  KappaSet kappas;
};

struct ContextOptions {
  int j_side = 14;  // kappas on [0, j_side]^2
  double tol = 1e-11;
  int nu_terms = 40;
  bool with_tilde = true;
};

AsymptoticContext build_context(const WalkModel& m, const Geometry& g, const ContextOptions& opt = {});

// adds kappa_(x_D(w), y_D(w)) to the context when w is in W0
void add_direction_kappa(const WalkModel& m, const Geometry& g, AsymptoticContext& ctx,
                         std::array<double, 2> w, const ContextOptions& opt = {});

AsymptoticPrediction predict_axis(const Geometry& g, const AsymptoticContext& ctx, Site j, int k1,
                                  int k2);
AsymptoticPrediction predict_direction(const WalkModel& m, const Geometry& g,
                                       const AsymptoticContext& ctx, Site j, Site k);

// limit of g(j,k)/g(0,k) along the direction of k
double martin_prediction(const WalkModel& m, const Geometry& g, const AsymptoticContext& ctx, Site j,
                         Site k);

// ------------------------------------------------------------ pole limits

struct AxisLimit {
  Regime regime = Regime::AxisSimplePole;
  Site j{0, 0};
  double power = 1;            // samples are (x_d - x)^power H_j(x, 0)
  double branch_gap = 0;       // x**_P - x_d
  std::vector<double> x, sample, sample_bound;
  double richardson = 0;       // order 2 in h = x_d - x
  double extrapolated = 0;     // polynomial in sqrt(gap + h) - sqrt(gap), through all nodes
  double bound = 0;            // oracle error carried through the extrapolation weights
  double spread = 0;           // change when the farthest node is dropped
  double target = 0;           // constant times kappa(j)
};

// (x_d - x)^p H_j(x,0) at x = x_d (1 - 0.2 2^-m), m = 1..n, extrapolated to
// x_d. A branch point of Y1 just beyond x_d makes the samples analytic in
// sqrt(gap + h) rather than h, so plain Richardson converges slowly there,
// and a small gap needs nodes closer to x_d.
struct AxisLimitOptions {
  Box strip{1600, 160};
  // nodes m = 1..n; n grows from min_nodes while the extrapolants through
  // the last n and n-1 nodes differ by more than spread_tol relatively
  int min_nodes = 5;
  int max_nodes = 7;
  double spread_tol = 1e-3;
};

std::vector<AxisLimit> axis_limits(const WalkModel& m, const Geometry& g, const AsymptoticContext& ctx,
                                   const std::vector<Site>& js, const AxisLimitOptions& opt = {});

struct PredictionRow {
  Site k{0, 0};
  std::string regime;
  double predicted = 0, oracle = 0, ratio = 0, bound = 0;
};

// k1,k2,regime,predicted,oracle,ratio,bound
void write_prediction_csv(std::ostream& out, const std::vector<PredictionRow>& rows);

}  // namespace qwalk
