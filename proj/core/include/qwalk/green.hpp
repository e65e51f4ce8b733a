#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qwalk/geometry.hpp"
#include "qwalk/model.hpp"

namespace qwalk {

using Site = std::array<int, 2>;

// Lattice box [0, kx] x [0, ky]; entries are stored k2-major (k1 fastest).
struct Box {
  int kx = 0;
  int ky = 0;
  std::size_t size() const { return std::size_t(kx + 1) * std::size_t(ky + 1); }
  std::size_t index(int k1, int k2) const { return std::size_t(k2) * std::size_t(kx + 1) + k1; }
  bool contains(int k1, int k2) const { return k1 >= 0 && k2 >= 0 && k1 <= kx && k2 <= ky; }
};

class GreenError : public std::runtime_error {
 public:
  enum class Kind { NoCertificate, OutsideDomain, InvalidArgument };
  GreenError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// f(k) = x1^k1 y1^k2 + c x2^k1 y2^k2 with E_k[f(Z(1)); Z(1) != 0] <= theta f(k)
// for every k != 0 outside the finite exceptional set E (axis states near the
// origin). With b(e) the excess at e in E and G(e,e) bounded through a
// box-restricted escape probability,
//   sum_n E_z[f(Z(n)); n < tau0] <= (f(z) + excess) / (1 - theta),
// where excess = sum_e b(e) G(e,e).
struct LyapunovCertificate {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double c = 1;
  double theta = 1;
  std::vector<Site> exceptional;
  double excess = 0;
  // max over the states that can jump to the origin of P(k -> 0) / f(k)
  double c0 = 0;

  double log_f(double k1, double k2) const;
  double f(int k1, int k2) const;
  // sup over k in Z^2_+ (optionally one axis only) of x^k1 y^k2 / f(k); +inf if unbounded
  double domination(double x, double y, int axis = -1) const;
  // sum_k g(j,k) f(k) <= this for the given source
  double weighted_mass_bound(const WalkModel& m, Site j) const;
};

// Grid search over int(D n D1) x int(D n D2) and the mixing weight c. Points in
// `dominate` must satisfy domination(x, y) < inf. With margin = 0 the pair
// minimizing theta wins; otherwise the score also rewards slow growth of f
// relative to (x_d, y_d) over `margin` lattice steps, which is what controls
// the truncation bound of a box enlarged by that margin (margin_y on the
// vertical side when given).
std::optional<LyapunovCertificate> find_certificate(
    const WalkModel& m, const Geometry& g,
    const std::vector<std::array<double, 2>>& dominate = {}, int margin = 0, int margin_y = -1);

// max over k outside E in the shell 0 < |k|_inf <= radius of E_k[f(Z(1)); Z(1) != 0] / f(k)
double certificate_check(const WalkModel& m, const LyapunovCertificate& cert, int radius);

// Direct solver for the chain killed at the origin, at the extra absorbing
// states and on exit from a box.
// The LU factors are computed by a subtraction-free elimination, so every
// entry of g and of the functionals keeps full relative accuracy.
class KilledChainSolver {
 public:
  KilledChainSolver(const WalkModel& m, Box box, const std::vector<Site>& absorbing = {});

  const Box& box() const { return box_; }
  const WalkModel& model() const { return model_; }

  // g(j, k) for k in the box (k2-major)
  std::vector<double> row(Site j) const;
  // h(j) = sum_k g(j, k) w(k) for all j in the box; w is k2-major
  std::vector<double> column(const std::vector<double>& w) const;
  // per-state expected f-weight leaving the box in one step, scaled by exp(-scale)
  std::vector<double> exit_weight(const LyapunovCertificate& cert, double scale) const;

 private:
  std::size_t perm(int k1, int k2) const;
  void factor(const std::vector<Site>& absorbing);

  WalkModel model_;
  Box box_;
  bool inner_y_ = true;
  int inner_ = 0;
  int outer_ = 0;
  std::size_t n_ = 0;
  int bl_ = 0, bu_ = 0;
  std::vector<double> band_;  // per row: bl_ multipliers, pivot, bu_ |U|
  std::vector<double> loss_;
  double at(std::size_t i, long off) const { return band_[i * (bl_ + bu_ + 1) + (bl_ + off)]; }
  double& at(std::size_t i, long off) { return band_[i * (bl_ + bu_ + 1) + (bl_ + off)]; }
};

struct BoundedVec {
  std::vector<double> value;
  std::vector<double> bound;
};

// Functionals h(j) = sum_k g(j,k) w(k) for every source j of a small box,
// from one direct solve on a larger work box. The truncation error of h(j)
// is at most sup_k w(k)/f(k) times the certified f-weighted residual of j.
class ColumnOracle {
 public:
  ColumnOracle(const WalkModel& m, const Geometry& g, Box jbox, Box work,
               const std::vector<std::array<double, 2>>& dominate = {});
  // work box margin doubled until every residual is <= tol or the
  // factorization would exceed about 4e9 flops; the side along the axis
  // where g/f decays slower gets the longer margin
  static ColumnOracle adaptive(const WalkModel& m, const Geometry& g, Box jbox, double tol,
                               const std::vector<std::array<double, 2>>& dominate = {});

  const Box& jbox() const { return jbox_; }
  const Box& work() const { return solver_.box(); }
  const std::optional<LyapunovCertificate>& cert() const { return cert_; }
  // sum_k (g - g_box)(j,k) f(k) per source in jbox; +inf without a certificate
  const std::vector<double>& residual_f() const { return residual_; }

  // w is evaluated on the work box; sup_w_over_f bounds w/f on all of Z^2_+
  BoundedVec column(const std::function<double(int, int)>& w, double sup_w_over_f) const;
  // axis 0: sum_{k1>=1} g(j,(k1,0)) z^k1, axis 1 the mirror; deriv gives the
  // termwise z-derivative
  BoundedVec axis_series(int axis, double z, bool deriv = false) const;
  BoundedVec hitting() const;
  std::vector<double> row(Site j) const { return solver_.row(j); }

 private:
  BoundedVec restrict(const std::vector<double>& h, double sup_w_over_f) const;

  WalkModel model_;
  Box jbox_;
  KilledChainSolver solver_;
  std::optional<LyapunovCertificate> cert_;
  std::vector<double> residual_;
  std::vector<double> exit_;
};

// sup over k >= 1 on one axis of z^k / f or, with deriv, k z^(k-1) / f
double axis_domination(const LyapunovCertificate& cert, double z, int axis, bool deriv);

enum class GreenMethod { Iterate, Direct };

struct GreenOptions {
  GreenMethod method = GreenMethod::Iterate;
  int threads = 1;
  long max_steps = 2000000;
  int margin = 0;  // 0 picks 16 times the largest jump
  std::vector<std::array<double, 2>> dominate;
};

struct GreenTable {
  Site source{0, 0};
  Box box;
  std::vector<double> values;
  std::vector<double> tail_bound;
  long horizon_used = -1;  // -1 means converged
  bool certified = false;
  std::string method;
  double hit_prob = 0;
  double hit_bound = 0;
  // sum_k (g - table)(j,k) f(k) over all k, valid when certified
  double residual_f = 0;
  std::optional<LyapunovCertificate> cert;

  double value(int k1, int k2) const { return values[box.index(k1, k2)]; }
  double bound(int k1, int k2) const { return tail_bound[box.index(k1, k2)]; }
};

GreenTable green_table(const WalkModel& m, const Geometry& g, Site j, Box box, double target_tol,
                       const GreenOptions& opt = {});

struct Bounded {
  double value = 0;
  double bound = 0;
};

// P_j(tau0 < inf) with its truncation bound; transient models and the Direct
// method use a ColumnOracle
Bounded hitting_prob(const WalkModel& m, const Geometry& g, Site j, double target_tol,
                     const GreenOptions& opt = {});

struct HValues {
  Bounded hx;   // H_j(x, 0)
  Bounded hy;   // H_j(0, y)
  Bounded hxy;  // H_j(x, y)
  Bounded hint; // sum over k1, k2 >= 1
};

HValues H_values(const GreenTable& t, const Geometry& g, double x, double y);

struct FEResidual {
  double residual = 0;
  double budget = 0;
};

// (1 - P) Hint - L_j + (1 - phi1) H_j(x,0) + (1 - phi2) H_j(0,y), the
// multiplied-out form of Q h_j = L_j + x(phi1 - 1) h1j + y(phi2 - 1) h2j
FEResidual functional_equation_residual(const GreenTable& t, const Geometry& g, double x, double y,
                                        double hit_shift = 0.0);

// E_(0,1)[x^{S1(tau1)}; tau1 < inf] for the mu-walk, with paths rising above
// height `horizon` discarded; a lower bound increasing to Y1(x) in the horizon.
double y1_probabilistic(const WalkModel& m, double x, long horizon);
// same with the first step drawn from mu1 (phi1(x, Y1(x)))
double phi1_branch_probabilistic(const WalkModel& m, double x, long horizon);

struct MonteCarloResult {
  std::vector<Site> targets;
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::uint64_t paths = 0;
  std::uint64_t capped = 0;
};

MonteCarloResult monte_carlo_green(const WalkModel& m, Site j, const std::vector<Site>& targets,
                                   std::uint64_t n_paths, std::uint64_t seed, long path_cap,
                                   int threads = 1);

struct ReachabilityReport {
  int N0 = 0;
  std::vector<Site> E0;
  Box box;
  bool box_relative = true;
};

ReachabilityReport reachability(const WalkModel& m, Box box);

void write_green_csv(std::ostream& out, const GreenTable& t);
GreenTable read_green_csv(std::istream& in);

}  // namespace qwalk
