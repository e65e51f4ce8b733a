#include "qwalk/green.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "qwalk/numeric.hpp"

namespace qwalk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int largest_jump(const WalkModel& m) {
  return std::max({m.mu.max_abs_jump(), m.mu0.max_abs_jump(), m.mu1.max_abs_jump(),
                   m.mu2.max_abs_jump(), 1});
}

// 1 - total mass, with masses summing to one within kMassTol treated as exact
double deficit(const JumpMeasure& jm) {
  ExactSum acc;
  acc.add(1.0);
  for (const auto& e : jm.entries()) acc.add(-e.mass);
  double d = acc.value();
  return std::fabs(d) <= kMassTol ? 0.0 : std::max(d, 0.0);
}

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

template <class F>
void run_rows(int threads, std::size_t n, F&& body) {
  if (threads <= 1) {
    body(std::size_t(0), n);
    return;
  }
  tbb::task_arena arena(threads);
  arena.execute([&] {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n),
                      [&](const tbb::blocked_range<std::size_t>& r) { body(r.begin(), r.end()); });
  });
}

}  // namespace

// ---------------------------------------------------------------- certificate

double LyapunovCertificate::log_f(double k1, double k2) const {
  double a = k1 * std::log(x1) + k2 * std::log(y1);
  double b = std::log(c) + k1 * std::log(x2) + k2 * std::log(y2);
  return log_add(a, b);
}

double LyapunovCertificate::f(int k1, int k2) const { return std::exp(log_f(k1, k2)); }

double LyapunovCertificate::domination(double x, double y, int axis) const {
  if (x < 0 || y < 0) throw GreenError(GreenError::Kind::InvalidArgument, "negative argument");
  if (x == 0 && y == 0) return 1.0 / f(0, 0);
  if (x == 0) axis = 1;
  if (y == 0) axis = 0;
  double lx = x > 0 ? std::log(x) : 0.0, ly = y > 0 ? std::log(y) : 0.0;
  double a1 = std::log(x1), b1 = std::log(y1), a2 = std::log(x2), b2 = std::log(y2);
  const double slack = 1e-12;
  // growth along the extreme rays and the ray where both terms of f balance
  if (axis != 1 && lx > a1 + slack) return kInf;
  if (axis != 0 && ly > b2 + slack) return kInf;
  if (axis == -1) {
    double d1 = b2 - b1, d2 = a1 - a2;
    if (d1 * lx + d2 * ly > d1 * a1 + d2 * b1 + slack) return kInf;
  }
  const int K = axis == -1 ? 400 : 4000;
  double best = -kInf;
  for (int i = 0; i <= K; ++i) {
    if (axis == 0) {
      best = std::max(best, i * lx - log_f(i, 0));
    } else if (axis == 1) {
      best = std::max(best, i * ly - log_f(0, i));
    } else {
      for (int k = 0; k <= K; ++k) best = std::max(best, i * lx + k * ly - log_f(i, k));
    }
  }
  return std::exp(best);
}

double LyapunovCertificate::weighted_mass_bound(const WalkModel& m, Site j) const {
  if (j[0] != 0 || j[1] != 0) return (f(j[0], j[1]) + excess) / (1.0 - theta);
  double s = 0;
  for (const auto& e : m.mu0.entries())
    if (e.dx != 0 || e.dy != 0) s += e.mass * (f(e.dx, e.dy) + excess);
  return f(0, 0) + s / (1.0 - theta);
}

namespace {

struct CandidatePoint {
  double x = 0, y = 0;
  double P = 0, phi1 = 0, phi2 = 0;
  std::vector<double> h_num;  // sum over unkilled jumps of mu1 at (k1, 0), k1 = 1..J+1
  std::vector<double> v_num;
};

CandidatePoint make_candidate(const WalkModel& m, double x, double y, int J) {
  CandidatePoint c;
  c.x = x;
  c.y = y;
  c.P = m.mu.gf(x, y);
  c.phi1 = m.mu1.gf(x, y);
  c.phi2 = m.mu2.gf(x, y);
  for (int k = 1; k <= J + 1; ++k) {
    ExactSum h, v;
    for (const auto& e : m.mu1.entries())
      if (k + e.dx != 0 || e.dy != 0) h.add(e.mass * ipow(x, k + e.dx) * ipow(y, e.dy));
    for (const auto& e : m.mu2.entries())
      if (e.dx != 0 || k + e.dy != 0) v.add(e.mass * ipow(x, e.dx) * ipow(y, k + e.dy));
    c.h_num.push_back(h.value());
    c.v_num.push_back(v.value());
  }
  return c;
}

constexpr int kExceptionalRadius = 24;

// ratio E_k[f(Z(1)); Z(1) != 0] / f(k) at (k, 0) or (0, k)
double axis_ratio(const CandidatePoint& p1, const CandidatePoint& p2, double c, int k, int J,
                  bool horizontal) {
  double a = horizontal ? p1.x : p1.y, b = horizontal ? p2.x : p2.y;
  double r = b / a;
  double w = c * ipow(r, k);
  double n1, n2;
  if (k <= J + 1) {
    const auto& v1 = horizontal ? p1.h_num : p1.v_num;
    const auto& v2 = horizontal ? p2.h_num : p2.v_num;
    n1 = v1[k - 1] / ipow(a, k);
    n2 = v2[k - 1] / ipow(b, k);
  } else {
    n1 = horizontal ? p1.phi1 : p1.phi2;
    n2 = horizontal ? p2.phi1 : p2.phi2;
  }
  return (n1 + w * n2) / (1.0 + w);
}

struct ThetaResult {
  double theta = 1;
  int n_h = 0, n_v = 0;  // number of exceptional axis states
};

ThetaResult theta_of(const CandidatePoint& p1, const CandidatePoint& p2, double c, int J) {
  ThetaResult t;
  const int N = kExceptionalRadius;
  // beyond N the axis ratios are monotone averages of their limits
  t.theta = std::max({p1.P, p2.P, p1.phi1, p2.phi2, axis_ratio(p1, p2, c, N + 1, J, true),
                      axis_ratio(p1, p2, c, N + 1, J, false)});
  for (int k = 1; k <= N; ++k) {
    if (axis_ratio(p1, p2, c, k, J, true) > t.theta) ++t.n_h;
    if (axis_ratio(p1, p2, c, k, J, false) > t.theta) ++t.n_v;
  }
  return t;
}

bool dominated(const CandidatePoint& p1, const CandidatePoint& p2, double x, double y) {
  const double slack = 1e-12;
  double lx = std::log(x), ly = std::log(y);
  double a1 = std::log(p1.x), b1 = std::log(p1.y), a2 = std::log(p2.x), b2 = std::log(p2.y);
  if (x > 0 && lx > a1 + slack) return false;
  if (y > 0 && ly > b2 + slack) return false;
  if (x > 0 && y > 0) {
    double d1 = b2 - b1, d2 = a1 - a2;
    if (d1 * lx + d2 * ly > d1 * a1 + d2 * b1 + slack) return false;
  }
  return true;
}

}  // namespace

std::optional<LyapunovCertificate> find_certificate(
    const WalkModel& m, const Geometry& g, const std::vector<std::array<double, 2>>& dominate,
    int margin, int margin_y) {
  if (margin_y < 0) margin_y = margin;
  const int J = largest_jump(m);
  const auto& cp = g.critical();
  const int nx = 24, nf = 9;
  std::vector<CandidatePoint> c1, c2;
  // log-spaced grid plus points just above the coordinates to dominate
  auto grid = [&](double lo, double hi, int coord) {
    std::vector<double> v;
    for (int i = 1; i < nx; ++i)
      v.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / double(nx)));
    for (const auto& d : dominate)
      if (d[coord] > lo && d[coord] < hi)
        for (double t : {0.0, 0.02, 0.05, 0.1, 0.2, 0.4})
          v.push_back(std::exp(std::log(d[coord]) + t * (std::log(hi) - std::log(d[coord]))));
    return v;
  };
  // candidates spread over the part of each line where P < 1 and phi < 1;
  // both sets are log-convex, so that part is an interval around the
  // minimizer of max(P, phi) on the line
  auto line = [&](double lo, double hi, const std::function<double(double)>& level,
                  const std::function<void(double)>& emit) {
    auto lv = [&](double t) { return level(std::exp(t)); };
    double tm = golden_min(lv, std::log(lo), std::log(hi), 1e-12);
    if (!(lv(tm) < 1)) return;
    auto edge = [&](double out) {
      Bracket br = bisect([&](double t) { return lv(t) - 1.0; }, tm, out, 1e-13);
      return lv(br.lo) < 1 ? br.lo : br.hi;
    };
    double a = lv(std::log(lo)) < 1 ? std::log(lo) : edge(std::log(lo));
    double b = lv(std::log(hi)) < 1 ? std::log(hi) : edge(std::log(hi));
    emit(std::exp(tm));
    for (int t = 1; t <= nf; ++t) {
      double v = a + (b - a) * t / double(nf + 1);
      if (lv(v) < 1) emit(std::exp(v));
    }
  };
  // the line through the most interior point of D n Di, which can be a
  // sliver thinner than the grid spacing near region boundaries
  auto deepest = [&](const AxisGeometry& side, double lo, double hi, const JumpMeasure& phi,
                     bool x_is_line) {
    auto depth = [&](double line) {
      auto [a, b] = side.roots(line);
      return golden_min(
          [&](double t) {
            double v = std::exp(t);
            double x = x_is_line ? line : v, y = x_is_line ? v : line;
            return std::max(m.mu.gf(x, y), phi.gf(x, y));
          },
          std::log(a), std::log(b), 1e-12);
    };
    auto value = [&](double t) {
      double line = std::exp(t);
      double tt = depth(line), v = std::exp(tt);
      return std::max(m.mu.gf(x_is_line ? line : v, x_is_line ? v : line),
                      phi.gf(x_is_line ? line : v, x_is_line ? v : line));
    };
    double t = golden_min(value, std::log(lo), std::log(hi), 1e-10);
    std::vector<double> v;
    for (double d : {0.0, 1e-3, -1e-3, 3e-3, -3e-3, 1e-2, -1e-2})
      if (t + d > std::log(lo) && t + d < std::log(hi)) v.push_back(std::exp(t + d));
    return v;
  };
  auto xlines = grid(cp.xP_star, cp.xP_star2, 0);
  for (double x : deepest(g.xside(), cp.xP_star, cp.xP_star2, m.mu1, true)) xlines.push_back(x);
  auto ylines = grid(cp.yP_star, cp.yP_star2, 1);
  for (double y : deepest(g.yside(), cp.yP_star, cp.yP_star2, m.mu2, false)) ylines.push_back(y);
  for (double x : xlines) {
    auto [lo, hi] = g.xside().roots(x);
    line(lo, hi, [&](double y) { return std::max(m.mu.gf(x, y), m.mu1.gf(x, y)); },
         [&](double y) { c1.push_back(make_candidate(m, x, y, J)); });
  }
  for (double y : ylines) {
    auto [lo, hi] = g.yside().roots(y);
    line(lo, hi, [&](double x) { return std::max(m.mu.gf(x, y), m.mu2.gf(x, y)); },
         [&](double x) { c2.push_back(make_candidate(m, x, y, J)); });
  }
  std::optional<LyapunovCertificate> best;
  double best_score = -kInf;
  int best_size = 0;
  const double lxd = std::log(cp.x_d), lyd = std::log(cp.y_d);
  for (const auto& p1 : c1) {
    for (const auto& p2 : c2) {
      if (!(p1.x > p2.x && p1.y < p2.y)) continue;
      bool ok = true;
      for (const auto& d : dominate)
        if (!dominated(p1, p2, d[0], d[1])) {
          ok = false;
          break;
        }
      if (!ok) continue;
      for (int e = -16; e <= 16; ++e) {
        double c = std::pow(10.0, e / 4.0);
        auto th = theta_of(p1, p2, c, J);
        if (!(th.theta < 1)) continue;
        int size = th.n_h + th.n_v;
        double score = std::log1p(-th.theta);
        if (margin > 0 || margin_y > 0)
          score += std::min(margin * (lxd - std::log(p1.x)), margin_y * (lyd - std::log(p2.y)));
        if (score > best_score || (score == best_score && size < best_size)) {
          best_score = score;
          best_size = size;
          LyapunovCertificate cert;
          cert.x1 = p1.x;
          cert.y1 = p1.y;
          cert.x2 = p2.x;
          cert.y2 = p2.y;
          cert.c = c;
          cert.theta = th.theta;
          best = cert;
        }
      }
    }
  }
  if (!best) return best;
  auto& cert = *best;
  auto one_step = [&](int k1, int k2) {
    ExactSum acc;
    for (const auto& e : m.measure_at(k1, k2).entries()) {
      int t1 = k1 + e.dx, t2 = k2 + e.dy;
      if (t1 != 0 || t2 != 0) acc.add(e.mass * cert.f(t1, t2));
    }
    return acc.value();
  };
  for (int k = 1; k <= kExceptionalRadius + J + 1; ++k) {
    for (Site s : {Site{k, 0}, Site{0, k}})
      if (one_step(s[0], s[1]) > cert.theta * cert.f(s[0], s[1])) cert.exceptional.push_back(s);
  }
  if (!cert.exceptional.empty()) {
    // G(e,e) = 1 / P_e(tau0 < return to e); the escape probability of the
    // box-restricted chain is a lower bound
    int K = kExceptionalRadius + 24 * J;
    double excess = 0;
    for (const auto& e : cert.exceptional) {
      Box b{K, K};
      KilledChainSolver solver(m, b, {e});
      std::vector<double> w(b.size(), 0.0);
      for (int k2 = 0; k2 <= K; ++k2)
        for (int k1 = 0; k1 <= K; ++k1)
          if ((k1 != 0 || k2 != 0) && Site{k1, k2} != e)
            w[b.index(k1, k2)] = m.measure_at(k1, k2).mass(-k1, -k2);
      auto h = solver.column(w);
      ExactSum esc;
      for (const auto& d : m.measure_at(e[0], e[1]).entries()) {
        int t1 = e[0] + d.dx, t2 = e[1] + d.dy;
        if (t1 == 0 && t2 == 0) esc.add(d.mass);
        else if (b.contains(t1, t2) && Site{t1, t2} != e) esc.add(d.mass * h[b.index(t1, t2)]);
      }
      double escape = esc.value();
      if (!(escape > 0)) return std::nullopt;
      excess += (one_step(e[0], e[1]) - cert.theta * cert.f(e[0], e[1])) / escape;
    }
    cert.excess = excess;
  }
  for (int k1 = 0; k1 <= J; ++k1)
    for (int k2 = 0; k2 <= J; ++k2) {
      if (k1 == 0 && k2 == 0) continue;
      double p = m.measure_at(k1, k2).mass(-k1, -k2);
      if (p > 0) best->c0 = std::max(best->c0, p / best->f(k1, k2));
    }
  return best;
}

double certificate_check(const WalkModel& m, const LyapunovCertificate& cert, int radius) {
  double worst = 0;
  for (int k1 = 0; k1 <= radius; ++k1)
    for (int k2 = 0; k2 <= radius; ++k2) {
      if (k1 == 0 && k2 == 0) continue;
      if (std::find(cert.exceptional.begin(), cert.exceptional.end(), Site{k1, k2}) !=
          cert.exceptional.end())
        continue;
      double lf = cert.log_f(k1, k2);
      ExactSum acc;
      for (const auto& e : m.measure_at(k1, k2).entries()) {
        int t1 = k1 + e.dx, t2 = k2 + e.dy;
        if (t1 == 0 && t2 == 0) continue;
        acc.add(e.mass * std::exp(cert.log_f(t1, t2) - lf));
      }
      worst = std::max(worst, acc.value());
    }
  return worst;
}

// ------------------------------------------------------------- direct solver

KilledChainSolver::KilledChainSolver(const WalkModel& m, Box box, const std::vector<Site>& absorbing)
    : model_(m), box_(box) {
  inner_y_ = box.ky <= box.kx;
  inner_ = inner_y_ ? box.ky : box.kx;
  outer_ = inner_y_ ? box.kx : box.ky;
  n_ = box.size();
  for (const auto* jm : {&m.mu, &m.mu0, &m.mu1, &m.mu2})
    for (const auto& e : jm->entries()) {
      long d = inner_y_ ? long(e.dx) * (inner_ + 1) + e.dy : long(e.dy) * (inner_ + 1) + e.dx;
      bl_ = std::max<long>(bl_, -d);
      bu_ = std::max<long>(bu_, d);
    }
  factor(absorbing);
}

std::size_t KilledChainSolver::perm(int k1, int k2) const {
  return inner_y_ ? std::size_t(k1) * (inner_ + 1) + k2 : std::size_t(k2) * (inner_ + 1) + k1;
}

void KilledChainSolver::factor(const std::vector<Site>& absorbing) {
  const std::size_t w = bl_ + bu_ + 1;
  band_.assign(n_ * w, 0.0);
  loss_.assign(n_, 0.0);
  std::vector<char> dead(n_, 0);
  dead[perm(0, 0)] = 1;
  for (const auto& a : absorbing)
    if (box_.contains(a[0], a[1])) dead[perm(a[0], a[1])] = 1;
  for (int k2 = 0; k2 <= box_.ky; ++k2)
    for (int k1 = 0; k1 <= box_.kx; ++k1) {
      std::size_t s = perm(k1, k2);
      if (dead[s]) {
        loss_[s] = 1.0;
        continue;
      }
      const auto& jm = model_.measure_at(k1, k2);
      double loss = deficit(jm);
      for (const auto& e : jm.entries()) {
        int t1 = k1 + e.dx, t2 = k2 + e.dy;
        if (!box_.contains(t1, t2) || dead[perm(t1, t2)]) {
          loss += e.mass;
          continue;
        }
        long off = long(perm(t1, t2)) - long(s);
        if (off != 0) at(s, off) += e.mass;
      }
      loss_[s] = loss;
    }
  // Grassmann-Taksar-Heyman elimination: pivots are rebuilt from the row loss
  // and the remaining off-diagonal magnitudes
  for (std::size_t k = 0; k < n_; ++k) {
    double piv = loss_[k];
    for (long q = 1; q <= bu_ && k + q < n_; ++q) piv += at(k, q);
    at(k, 0) = piv;
    for (long o = 1; o <= bl_ && k + o < n_; ++o) {
      std::size_t i = k + o;
      double a = at(i, -o);
      if (a == 0) continue;
      double mlt = a / piv;
      at(i, -o) = mlt;
      loss_[i] += mlt * loss_[k];
      double* ri = &band_[i * w + bl_];
      const double* rk = &band_[k * w + bl_];
      for (long q = 1; q <= bu_ && k + q < n_; ++q) {
        if (q == o) continue;
        ri[q - o] += mlt * rk[q];
      }
    }
  }
}

std::vector<double> KilledChainSolver::row(Site j) const {
  if (!box_.contains(j[0], j[1]))
    throw GreenError(GreenError::Kind::InvalidArgument, "source outside the box");
  std::vector<double> acc(n_, 0.0);
  acc[perm(j[0], j[1])] = 1.0;
  if (j[0] == 0 && j[1] == 0)
    for (const auto& e : model_.mu0.entries())
      if ((e.dx != 0 || e.dy != 0) && box_.contains(e.dx, e.dy)) acc[perm(e.dx, e.dy)] += e.mass;
  // U^T z = b
  for (std::size_t k = 0; k < n_; ++k) {
    acc[k] /= at(k, 0);
    for (long q = 1; q <= bu_ && k + q < n_; ++q) acc[k + q] += at(k, q) * acc[k];
  }
  // L^T g = z
  for (std::size_t k = n_; k-- > 0;) {
    double s = acc[k];
    for (long o = 1; o <= bl_ && k + o < n_; ++o) s += at(k + o, -o) * acc[k + o];
    acc[k] = s;
  }
  std::vector<double> out(n_);
  for (int k2 = 0; k2 <= box_.ky; ++k2)
    for (int k1 = 0; k1 <= box_.kx; ++k1) out[box_.index(k1, k2)] = acc[perm(k1, k2)];
  return out;
}

std::vector<double> KilledChainSolver::column(const std::vector<double>& w) const {
  if (w.size() != n_) throw GreenError(GreenError::Kind::InvalidArgument, "weight size mismatch");
  std::vector<double> y(n_);
  for (int k2 = 0; k2 <= box_.ky; ++k2)
    for (int k1 = 0; k1 <= box_.kx; ++k1) y[perm(k1, k2)] = w[box_.index(k1, k2)];
  for (std::size_t i = 0; i < n_; ++i) {
    double s = y[i];
    for (long o = 1; o <= bl_ && o <= long(i); ++o) s += at(i, -o) * y[i - o];
    y[i] = s;
  }
  for (std::size_t i = n_; i-- > 0;) {
    double s = y[i];
    for (long q = 1; q <= bu_ && i + q < n_; ++q) s += at(i, q) * y[i + q];
    y[i] = s / at(i, 0);
  }
  std::vector<double> out(n_);
  for (int k2 = 0; k2 <= box_.ky; ++k2)
    for (int k1 = 0; k1 <= box_.kx; ++k1) out[box_.index(k1, k2)] = y[perm(k1, k2)];
  double h0 = w[0];
  for (const auto& e : model_.mu0.entries())
    if ((e.dx != 0 || e.dy != 0) && box_.contains(e.dx, e.dy))
      h0 += e.mass * out[box_.index(e.dx, e.dy)];
  out[0] = h0;
  return out;
}

std::vector<double> KilledChainSolver::exit_weight(const LyapunovCertificate& cert,
                                                   double scale) const {
  std::vector<double> out(n_, 0.0);
  for (int k2 = 0; k2 <= box_.ky; ++k2)
    for (int k1 = 0; k1 <= box_.kx; ++k1) {
      double s = 0;
      for (const auto& e : model_.measure_at(k1, k2).entries()) {
        int t1 = k1 + e.dx, t2 = k2 + e.dy;
        if (!box_.contains(t1, t2)) s += e.mass * std::exp(cert.log_f(t1, t2) - scale);
      }
      out[box_.index(k1, k2)] = s;
    }
  return out;
}

// ------------------------------------------------------------------- tables

namespace {

std::vector<double> exit_mass(const WalkModel& m, Box b) {
  std::vector<double> out(b.size(), 0.0);
  for (int k2 = 0; k2 <= b.ky; ++k2)
    for (int k1 = 0; k1 <= b.kx; ++k1) {
      double s = 0;
      for (const auto& e : m.measure_at(k1, k2).entries())
        if (!b.contains(k1 + e.dx, k2 + e.dy)) s += e.mass;
      out[b.index(k1, k2)] = s;
    }
  return out;
}

std::vector<double> kill_mass(const WalkModel& m, Box b) {
  std::vector<double> out(b.size(), 0.0);
  for (int k2 = 0; k2 <= b.ky; ++k2)
    for (int k1 = 0; k1 <= b.kx; ++k1) {
      if (k1 == 0 && k2 == 0) continue;
      out[b.index(k1, k2)] = m.measure_at(k1, k2).mass(-k1, -k2);
    }
  return out;
}

double min_log_f(const LyapunovCertificate& cert, Box b) {
  double r = kInf;
  for (int k2 = 0; k2 <= b.ky; ++k2)
    for (int k1 = 0; k1 <= b.kx; ++k1) r = std::min(r, cert.log_f(k1, k2));
  return r;
}

void restrict_to(GreenTable& t, const std::vector<double>& full, Box work) {
  t.values.assign(t.box.size(), 0.0);
  for (int k2 = 0; k2 <= t.box.ky; ++k2)
    for (int k1 = 0; k1 <= t.box.kx; ++k1)
      t.values[t.box.index(k1, k2)] = full[work.index(k1, k2)];
}

GreenTable direct_table(const WalkModel& m, const std::optional<LyapunovCertificate>& cert,
                        Site j, Box box, int margin) {
  Box work{box.kx + margin, box.ky + margin};
  KilledChainSolver solver(m, work);
  auto g = solver.row(j);
  GreenTable t;
  t.source = j;
  t.box = box;
  t.method = "direct";
  t.cert = cert;
  restrict_to(t, g, work);
  auto kill = kill_mass(m, work);
  auto ex = exit_mass(m, work);
  double hit = 0, out = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    hit += g[i] * kill[i];
    out += g[i] * ex[i];
  }
  t.hit_prob = hit;
  t.tail_bound.assign(box.size(), kInf);
  if (!cert) {
    t.certified = false;
    t.hit_bound = out;
    t.residual_f = kInf;
    std::fill(t.tail_bound.begin(), t.tail_bound.end(), out);
    return t;
  }
  const double scale = std::max(0.0, cert->log_f(work.kx + 1, work.ky + 1) - 600.0);
  auto ew = solver.exit_weight(*cert, scale);
  double ef = 0;
  for (std::size_t i = 0; i < g.size(); ++i) ef += g[i] * ew[i];
  double tail = ef + cert->excess * std::exp(-scale) * out;
  double log_res = (tail > 0 ? std::log(tail) : -kInf) + scale - std::log1p(-cert->theta);
  t.certified = true;
  t.residual_f = std::exp(log_res);
  t.hit_bound = std::min(out, cert->c0 * t.residual_f);
  for (int k2 = 0; k2 <= box.ky; ++k2)
    for (int k1 = 0; k1 <= box.kx; ++k1)
      t.tail_bound[box.index(k1, k2)] = std::exp(log_res - cert->log_f(k1, k2));
  return t;
}

struct PullGraph {
  std::vector<std::size_t> start;
  std::vector<std::uint32_t> src;
  std::vector<double> prob;
};

PullGraph build_pull(const WalkModel& m, Box b) {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> in(b.size());
  for (int k2 = 0; k2 <= b.ky; ++k2)
    for (int k1 = 0; k1 <= b.kx; ++k1)
      for (const auto& e : m.measure_at(k1, k2).entries()) {
        int t1 = k1 + e.dx, t2 = k2 + e.dy;
        if ((t1 == 0 && t2 == 0) || !b.contains(t1, t2)) continue;
        in[b.index(t1, t2)].push_back({std::uint32_t(b.index(k1, k2)), e.mass});
      }
  PullGraph pg;
  pg.start.push_back(0);
  for (auto& v : in) {
    for (auto& [s, p] : v) {
      pg.src.push_back(s);
      pg.prob.push_back(p);
    }
    pg.start.push_back(pg.src.size());
  }
  return pg;
}

enum class IterStatus { Converged, Horizon, Leaky };

GreenTable iterate_table(const WalkModel& m, const std::optional<LyapunovCertificate>& cert,
                         Site j, Box box, double tol, int margin, const GreenOptions& opt,
                         IterStatus& status) {
  Box work{box.kx + margin, box.ky + margin};
  const std::size_t n = work.size();
  auto pg = build_pull(m, work);
  auto kill = kill_mass(m, work);
  auto ex = exit_mass(m, work);
  std::vector<double> fs(n, 0.0), exf(n, 0.0);
  double scale = 0, one_minus_theta = 1, fmin = 1, excess = 0;
  if (cert) {
    scale = std::max(0.0, cert->log_f(work.kx + 1, work.ky + 1) - 600.0);
    one_minus_theta = -std::expm1(std::log(cert->theta));
    fmin = std::exp(min_log_f(*cert, box) - scale);
    excess = cert->excess * std::exp(-scale);
    for (int k2 = 0; k2 <= work.ky; ++k2)
      for (int k1 = 0; k1 <= work.kx; ++k1) {
        std::size_t i = work.index(k1, k2);
        fs[i] = std::exp(cert->log_f(k1, k2) - scale);
        double s = 0;
        for (const auto& e : m.measure_at(k1, k2).entries()) {
          int t1 = k1 + e.dx, t2 = k2 + e.dy;
          if (!work.contains(t1, t2)) s += e.mass * std::exp(cert->log_f(t1, t2) - scale);
        }
        exf[i] = s;
      }
  }
  std::vector<double> rho(n, 0.0), next(n, 0.0), acc(n, 0.0);
  rho[work.index(j[0], j[1])] = 1.0;
  const int rows = work.ky + 1, cols = work.kx + 1;
  std::vector<double> row_f(rows), row_mass(rows), row_kill(rows), row_out(rows), row_outf(rows);
  double hit = 0, leaked = 0, leaked_f = 0, R = 0, mass = 1;
  long step = 0;
  status = IterStatus::Horizon;
  for (; step < opt.max_steps; ++step) {
    run_rows(opt.threads, rows, [&](std::size_t r0, std::size_t r1) {
      for (std::size_t r = r0; r < r1; ++r) {
        double k = 0, o = 0, of = 0;
        for (int c = 0; c < cols; ++c) {
          std::size_t i = r * cols + c;
          acc[i] += rho[i];
          k += rho[i] * kill[i];
          o += rho[i] * ex[i];
          of += rho[i] * exf[i];
        }
        row_kill[r] = k;
        row_out[r] = o;
        row_outf[r] = of;
      }
    });
    run_rows(opt.threads, rows, [&](std::size_t r0, std::size_t r1) {
      for (std::size_t r = r0; r < r1; ++r) {
        double sf = 0, sm = 0;
        for (int c = 0; c < cols; ++c) {
          std::size_t i = r * cols + c;
          double s = 0;
          for (std::size_t q = pg.start[i]; q < pg.start[i + 1]; ++q) s += pg.prob[q] * rho[pg.src[q]];
          next[i] = s;
          sf += s * fs[i];
          sm += s;
        }
        row_f[r] = sf;
        row_mass[r] = sm;
      }
    });
    R = 0;
    mass = 0;
    for (int r = 0; r < rows; ++r) {
      hit += row_kill[r];
      leaked += row_out[r];
      leaked_f += row_outf[r];
      R += row_f[r];
      mass += row_mass[r];
    }
    rho.swap(next);
    if (cert) {
      if (leaked_f + excess * leaked > 0.1 * tol * one_minus_theta * fmin) {
        status = IterStatus::Leaky;
        break;
      }
      if (R + leaked_f + excess * (mass + leaked) <= tol * one_minus_theta * fmin) {
        status = IterStatus::Converged;
        ++step;
        break;
      }
    } else if (mass <= tol) {
      status = IterStatus::Converged;
      ++step;
      break;
    }
  }
  GreenTable t;
  t.source = j;
  t.box = box;
  t.method = "iterate";
  t.cert = cert;
  restrict_to(t, acc, work);
  t.hit_prob = hit;
  t.horizon_used = cert && status == IterStatus::Converged ? -1 : step;
  t.tail_bound.assign(box.size(), 0.0);
  if (cert) {
    t.certified = true;
    double log_res =
        std::log(R + leaked_f + excess * (mass + leaked)) + scale - std::log(one_minus_theta);
    t.residual_f = std::exp(log_res);
    t.hit_bound = std::min(mass + leaked, cert->c0 * t.residual_f);
    for (int k2 = 0; k2 <= box.ky; ++k2)
      for (int k1 = 0; k1 <= box.kx; ++k1)
        t.tail_bound[box.index(k1, k2)] = std::exp(log_res - cert->log_f(k1, k2));
  } else {
    t.certified = false;
    t.residual_f = kInf;
    t.hit_bound = mass + leaked;
    std::fill(t.tail_bound.begin(), t.tail_bound.end(), mass + leaked);
  }
  return t;
}

}  // namespace

GreenTable green_table(const WalkModel& m, const Geometry& g, Site j, Box box, double target_tol,
                       const GreenOptions& opt) {
  if (!(target_tol > 0)) throw GreenError(GreenError::Kind::InvalidArgument, "target_tol must be > 0");
  if (j[0] < 0 || j[1] < 0 || box.kx < 0 || box.ky < 0)
    throw GreenError(GreenError::Kind::InvalidArgument, "negative index");
  if (!box.contains(j[0], j[1])) box = Box{std::max(box.kx, j[0]), std::max(box.ky, j[1])};
  int margin = opt.margin > 0 ? opt.margin : 16 * largest_jump(m);
  if (opt.method == GreenMethod::Direct) {
    // grow the margin until the certified bound meets the target or the
    // banded factorization would get too large (1.6e10 flops, ~400 MB of band)
    for (;;) {
      auto cert = find_certificate(m, g, opt.dominate, margin);
      auto t = direct_table(m, cert, j, box, margin);
      double worst = *std::max_element(t.tail_bound.begin(), t.tail_bound.end());
      if (worst <= target_tol || opt.margin > 0) return t;
      double next = 2.0 * margin;
      double n = (box.kx + next + 1) * (box.ky + next + 1);
      double band = std::min(box.kx, box.ky) + next + 1;
      if (n * band * band > 1.6e10) return t;
      margin = int(next);
    }
  }
  auto cert = find_certificate(m, g, opt.dominate);
  for (int attempt = 0;; ++attempt) {
    IterStatus st;
    auto t = iterate_table(m, cert, j, box, target_tol, margin, opt, st);
    if (st != IterStatus::Leaky || attempt >= 8) {
      if (st == IterStatus::Leaky) t.horizon_used = std::max<long>(t.horizon_used, 0);
      return t;
    }
    margin *= 2;
  }
}

Bounded hitting_prob(const WalkModel& m, const Geometry& g, Site j, double target_tol,
                     const GreenOptions& opt) {
  if (opt.method == GreenMethod::Iterate && classify_recurrence(m).label <= Recurrence::R2) {
    auto t = green_table(m, g, j, Box{j[0], j[1]}, target_tol, opt);
    return {t.hit_prob, t.hit_bound};
  }
  // the iteration converges too slowly when mass escapes to infinity
  Box jb{j[0], j[1]};
  auto h = ColumnOracle::adaptive(m, g, jb, target_tol, opt.dominate).hitting();
  return {h.value[jb.index(j[0], j[1])], h.bound[jb.index(j[0], j[1])]};
}

// ------------------------------------------------------------ column oracle

double axis_domination(const LyapunovCertificate& cert, double z, int axis, bool deriv) {
  if (!(z > 0)) return deriv ? 1.0 / cert.f(axis == 0, axis == 1) : 0.0;
  double growth = axis == 0 ? std::max(cert.x1, cert.x2) : std::max(cert.y1, cert.y2);
  if (z > growth * (1 + 1e-12)) return kInf;
  if (z >= growth && deriv) return kInf;
  double lz = std::log(z), best = -kInf;
  for (int k = 1; k <= 200000; ++k) {
    double v = deriv ? std::log(double(k)) + (k - 1) * lz : k * lz;
    v -= axis == 0 ? cert.log_f(k, 0) : cert.log_f(0, k);
    best = std::max(best, v);
    if (k > 64 && v < best - 40) break;
  }
  return std::exp(best);
}

ColumnOracle::ColumnOracle(const WalkModel& m, const Geometry& g, Box jbox, Box work,
                           const std::vector<std::array<double, 2>>& dominate)
    : model_(m), jbox_(jbox), solver_(m, work) {
  if (!(work.contains(jbox.kx, jbox.ky)))
    throw GreenError(GreenError::Kind::InvalidArgument, "work box must contain the source box");
  cert_ = find_certificate(m, g, dominate, std::max(work.kx - jbox.kx, 1),
                           std::max(work.ky - jbox.ky, 1));
  exit_ = solver_.column(exit_mass(m, work));
  residual_.assign(jbox.size(), kInf);
  if (!cert_) return;
  const double scale = std::max(0.0, cert_->log_f(work.kx + 1, work.ky + 1) - 600.0);
  auto ef = solver_.column(solver_.exit_weight(*cert_, scale));
  for (int k2 = 0; k2 <= jbox.ky; ++k2)
    for (int k1 = 0; k1 <= jbox.kx; ++k1) {
      std::size_t i = work.index(k1, k2);
      double tail = ef[i] + cert_->excess * std::exp(-scale) * exit_[i];
      double lr = (tail > 0 ? std::log(tail) : -kInf) + scale - std::log1p(-cert_->theta);
      residual_[jbox.index(k1, k2)] = std::exp(lr);
    }
}

ColumnOracle ColumnOracle::adaptive(const WalkModel& m, const Geometry& g, Box jbox, double tol,
                                    const std::vector<std::array<double, 2>>& dominate) {
  // margins in inverse proportion to the decay rates of g/f along each axis,
  // so that the f-weight leaving through every side is comparable
  const auto& cp = g.critical();
  auto sides = [&](int margin) {
    auto c = find_certificate(m, g, dominate, margin);
    if (!c) return Box{jbox.kx + margin, jbox.ky + margin};
    double rx = std::max(std::log(cp.x_d / std::max(c->x1, c->x2)), 1e-3);
    double ry = std::max(std::log(cp.y_d / std::max(c->y1, c->y2)), 1e-3);
    double r = std::max(rx, ry);
    auto side = [&](double rate) { return int(std::min(std::ceil(margin * r / rate), 64.0 * margin)); };
    return Box{jbox.kx + side(rx), jbox.ky + side(ry)};
  };
  auto cost = [](Box b) {
    double n = double(b.kx + 1) * (b.ky + 1), s = std::min(b.kx, b.ky) + 1;
    return n * s * s;
  };
  int margin = 32 * largest_jump(m);
  for (;;) {
    ColumnOracle o(m, g, jbox, sides(margin), dominate);
    double worst = *std::max_element(o.residual_.begin(), o.residual_.end());
    if (worst <= tol || cost(sides(2 * margin)) > 4e9) return o;
    margin *= 2;
  }
}

BoundedVec ColumnOracle::restrict(const std::vector<double>& h, double sup_w_over_f) const {
  BoundedVec r;
  r.value.resize(jbox_.size());
  r.bound.resize(jbox_.size());
  const Box& work = solver_.box();
  for (int k2 = 0; k2 <= jbox_.ky; ++k2)
    for (int k1 = 0; k1 <= jbox_.kx; ++k1) {
      std::size_t i = jbox_.index(k1, k2);
      r.value[i] = h[work.index(k1, k2)];
      r.bound[i] = sup_w_over_f == 0 ? 0.0 : sup_w_over_f * residual_[i];
    }
  return r;
}

BoundedVec ColumnOracle::column(const std::function<double(int, int)>& w,
                                double sup_w_over_f) const {
  const Box& work = solver_.box();
  std::vector<double> wv(work.size(), 0.0);
  for (int k2 = 0; k2 <= work.ky; ++k2)
    for (int k1 = 0; k1 <= work.kx; ++k1)
      if (k1 != 0 || k2 != 0) wv[work.index(k1, k2)] = w(k1, k2);
  return restrict(solver_.column(wv), sup_w_over_f);
}

BoundedVec ColumnOracle::axis_series(int axis, double z, bool deriv) const {
  auto w = [&](int k1, int k2) {
    int k = axis == 0 ? k1 : k2;
    if ((axis == 0 ? k2 : k1) != 0 || k == 0) return 0.0;
    return deriv ? k * ipow(z, k - 1) : ipow(z, k);
  };
  double c = cert_ ? axis_domination(*cert_, z, axis, deriv) : kInf;
  const Box& work = solver_.box();
  int K = axis == 0 ? work.kx : work.ky;
  if (!(z > 0) || K * std::log(z) < 600) return column(w, c);
  // z^k would overflow: sum per source in log space, where g(j,k) z^k stays finite
  BoundedVec r;
  r.value.assign(jbox_.size(), 0.0);
  r.bound.assign(jbox_.size(), 0.0);
  const double lz = std::log(z);
  for (int j2 = 0; j2 <= jbox_.ky; ++j2)
    for (int j1 = 0; j1 <= jbox_.kx; ++j1) {
      auto g = solver_.row({j1, j2});
      ExactSum acc;
      for (int k = 1; k <= K; ++k) {
        double v = axis == 0 ? g[work.index(k, 0)] : g[work.index(0, k)];
        if (v > 0)
          acc.add(std::exp(std::log(v) + (deriv ? std::log(double(k)) + (k - 1) * lz : k * lz)));
      }
      std::size_t i = jbox_.index(j1, j2);
      r.value[i] = acc.value();
      r.bound[i] = c * residual_[i];
    }
  return r;
}

BoundedVec ColumnOracle::hitting() const {
  const Box& work = solver_.box();
  auto r = restrict(solver_.column(kill_mass(model_, work)), cert_ ? cert_->c0 : kInf);
  for (int k2 = 0; k2 <= jbox_.ky; ++k2)
    for (int k1 = 0; k1 <= jbox_.kx; ++k1) {
      std::size_t i = jbox_.index(k1, k2);
      r.bound[i] = std::min(r.bound[i], exit_[work.index(k1, k2)]);
    }
  return r;
}

// ---------------------------------------------------------------- H values

namespace {

// sup over k outside [0,kx] x [0,ky] of x^k1 y^k2 / f(k), within the chosen axis
double outside_ratio(const LyapunovCertificate& cert, double x, double y, int axis, Box b) {
  if (cert.domination(x, y, axis) == kInf) return kInf;
  double lx = x > 0 ? std::log(x) : -kInf, ly = y > 0 ? std::log(y) : -kInf;
  double best = -kInf;
  const int L = 400;
  if (axis == 0) {
    for (int i = b.kx + 1; i <= b.kx + 10 * L; ++i) best = std::max(best, i * lx - cert.log_f(i, 0));
  } else if (axis == 1) {
    for (int i = b.ky + 1; i <= b.ky + 10 * L; ++i) best = std::max(best, i * ly - cert.log_f(0, i));
  } else {
    for (int k2 = 1; k2 <= b.ky + L; ++k2)
      for (int k1 = 1; k1 <= b.kx + L; ++k1) {
        if (k1 <= b.kx && k2 <= b.ky) continue;
        best = std::max(best, k1 * lx + k2 * ly - cert.log_f(k1, k2));
      }
  }
  return std::exp(best);
}

}  // namespace

HValues H_values(const GreenTable& t, const Geometry& g, double x, double y) {
  const auto& cp = g.critical();
  if (x < 0 || y < 0 || x >= cp.x_d || y >= cp.y_d)
    throw GreenError(GreenError::Kind::OutsideDomain,
                     fmt::format("({}, {}) outside [0, x_d) x [0, y_d)", fmt_short(x), fmt_short(y)));
  ExactSum hx, hy, hint;
  for (int k2 = 0; k2 <= t.box.ky; ++k2)
    for (int k1 = 0; k1 <= t.box.kx; ++k1) {
      if (k1 == 0 && k2 == 0) continue;
      double v = t.value(k1, k2) * ipow(x, k1) * ipow(y, k2);
      if (k2 == 0) hx.add(v);
      else if (k1 == 0) hy.add(v);
      else hint.add(v);
    }
  HValues r;
  r.hx.value = hx.value();
  r.hy.value = hy.value();
  r.hint.value = hint.value();
  r.hxy.value = exact_sum(std::vector<double>{r.hx.value, r.hy.value, r.hint.value});
  if (!t.certified || !t.cert) {
    r.hx.bound = r.hy.bound = r.hint.bound = r.hxy.bound = kInf;
    return r;
  }
  const auto& c = *t.cert;
  double mb = c.weighted_mass_bound(g.model(), t.source);
  auto bound = [&](int axis) {
    double cw = c.domination(x, y, axis);
    if (cw == kInf)
      throw GreenError(GreenError::Kind::OutsideDomain,
                       fmt::format("({}, {}) not dominated by the certificate", fmt_short(x), fmt_short(y)));
    return cw * t.residual_f + outside_ratio(c, x, y, axis, t.box) * mb;
  };
  r.hx.bound = x > 0 ? bound(0) : 0.0;
  r.hy.bound = y > 0 ? bound(1) : 0.0;
  r.hint.bound = x > 0 && y > 0 ? bound(-1) : 0.0;
  r.hxy.bound = r.hx.bound + r.hy.bound + r.hint.bound;
  return r;
}

FEResidual functional_equation_residual(const GreenTable& t, const Geometry& g, double x, double y,
                                        double hit_shift) {
  if (!(x > 0 && y > 0))
    throw GreenError(GreenError::Kind::OutsideDomain, "functional equation needs x, y > 0");
  const auto& m = g.model();
  auto h = H_values(t, g, x, y);
  double oP = 1.0 - m.mu.gf(x, y);
  double o1 = 1.0 - m.mu1.gf(x, y);
  double o2 = 1.0 - m.mu2.gf(x, y);
  double L = eval_L(m, t.source[0], t.source[1], x, y, t.hit_prob + hit_shift);
  double t1 = oP * h.hint.value, t3 = o1 * h.hx.value, t4 = o2 * h.hy.value;
  FEResidual r;
  r.residual = std::fabs(exact_sum(std::vector<double>{t1, -L, t3, t4}));
  double scale = std::fabs(t1) + std::fabs(L) + std::fabs(t3) + std::fabs(t4) + 1.0;
  r.budget = std::fabs(oP) * h.hint.bound + std::fabs(o1) * h.hx.bound + std::fabs(o2) * h.hy.bound +
             t.hit_bound + 1e-13 * scale;
  return r;
}

// ----------------------------------------------------- probabilistic branches

namespace {

// v(h) = expected x-weight of the mu-walk from height h absorbed at height 0
// before rising above H, for h = 1..H (v[0] = 1). This is the limit in time of
// the per-height weight recursion; I - A is a nonsingular M-matrix on the
// truncated strip, so elimination without pivoting is stable.
std::vector<double> absorb_weights(const WalkModel& m, double x, int H) {
  int up = 0;
  for (const auto& e : m.mu.entries()) up = std::max(up, e.dy);
  std::vector<double> a(up + 2, 0.0);  // a[dy + 1]
  for (const auto& e : m.mu.entries()) a[e.dy + 1] += e.mass * ipow(x, e.dx);
  const int w = up + 1;
  std::vector<double> U(std::size_t(H + 1) * w, 0.0), rhs(H + 1, 0.0);
  for (int h = 1; h <= H; ++h) {
    double* r = &U[std::size_t(h) * w];
    r[0] = 1.0 - a[1];
    for (int d = 1; d <= up; ++d) r[d] = h + d <= H ? -a[d + 1] : 0.0;
    rhs[h] = h == 1 ? a[0] : 0.0;
    if (h > 1) {
      const double* p = &U[std::size_t(h - 1) * w];
      double mlt = -a[0] / p[0];
      for (int d = 1; d <= up; ++d) r[d - 1] -= mlt * p[d];
      rhs[h] -= mlt * rhs[h - 1];
    }
  }
  std::vector<double> v(H + 1, 0.0);
  v[0] = 1.0;
  for (int h = H; h >= 1; --h) {
    const double* r = &U[std::size_t(h) * w];
    double s = rhs[h];
    for (int d = 1; d <= up && h + d <= H; ++d) s -= r[d] * v[h + d];
    v[h] = s / r[0];
  }
  return v;
}

}  // namespace

double y1_probabilistic(const WalkModel& m, double x, long horizon) {
  int H = int(std::clamp<long>(horizon, 1, 1 << 24));
  return absorb_weights(m, x, H)[1];
}

double phi1_branch_probabilistic(const WalkModel& m, double x, long horizon) {
  int H = int(std::clamp<long>(horizon, 1, 1 << 24));
  auto v = absorb_weights(m, x, H);
  ExactSum acc;
  for (const auto& e : m.mu1.entries())
    if (e.dy <= H) acc.add(e.mass * ipow(x, e.dx) * v[e.dy]);
  return acc.value();
}

// ---------------------------------------------------------------- Monte Carlo

namespace {

std::uint64_t splitmix(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct Sampler {
  std::vector<double> cum;
  std::vector<Jump> jumps;
  explicit Sampler(const JumpMeasure& jm) {
    double c = 0;
    for (const auto& e : jm.entries()) {
      c += e.mass;
      cum.push_back(c);
      jumps.push_back(e);
    }
    // stochastic within tolerance: never kill by rounding
    if (!cum.empty() && deficit(jm) == 0.0) cum.back() = 2.0;
  }
  const Jump* draw(double u) const {
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return it == cum.end() ? nullptr : &jumps[it - cum.begin()];
  }
};

}  // namespace

MonteCarloResult monte_carlo_green(const WalkModel& m, Site j, const std::vector<Site>& targets,
                                   std::uint64_t n_paths, std::uint64_t seed, long path_cap,
                                   int threads) {
  if (n_paths < 1) throw GreenError(GreenError::Kind::InvalidArgument, "n_paths must be >= 1");
  Sampler s0(m.mu0), s1(m.mu1), s2(m.mu2), s(m.mu);
  int bx = j[0], by = j[1];
  for (const auto& t : targets) {
    bx = std::max(bx, t[0]);
    by = std::max(by, t[1]);
  }
  Box tb{bx, by};
  std::vector<int> slot(tb.size(), -1);
  for (std::size_t i = 0; i < targets.size(); ++i)
    if (tb.contains(targets[i][0], targets[i][1])) slot[tb.index(targets[i][0], targets[i][1])] = int(i);
  const std::uint64_t block = 4096;
  const std::uint64_t nblocks = (n_paths + block - 1) / block;
  const std::size_t T = targets.size();
  std::vector<std::uint64_t> s1sum(nblocks * T, 0), s2sum(nblocks * T, 0), capped(nblocks, 0);
  auto body = [&](std::uint64_t b) {
    std::vector<std::uint64_t> cnt(T, 0);
    std::vector<std::size_t> touched;
    std::uint64_t* a1 = &s1sum[b * T];
    std::uint64_t* a2 = &s2sum[b * T];
    for (std::uint64_t p = b * block; p < std::min(n_paths, (b + 1) * block); ++p) {
      std::uint64_t st = seed ^ (0xD1B54A32D192ED03ULL * (p + 1));
      splitmix(st);
      int k1 = j[0], k2 = j[1];
      touched.clear();
      auto visit = [&](int a, int c) {
        if (!tb.contains(a, c)) return;
        int sl = slot[tb.index(a, c)];
        if (sl < 0) return;
        if (cnt[sl]++ == 0) touched.push_back(sl);
      };
      visit(k1, k2);
      long n = 0;
      for (;; ++n) {
        if (n >= path_cap) {
          ++capped[b];
          break;
        }
        const Sampler& sm = (k1 == 0 && k2 == 0) ? s0 : k2 == 0 ? s1 : k1 == 0 ? s2 : s;
        double u = double(splitmix(st) >> 11) * 0x1.0p-53;
        const Jump* e = sm.draw(u);
        if (!e) break;
        k1 += e->dx;
        k2 += e->dy;
        if (k1 == 0 && k2 == 0) break;
        visit(k1, k2);
      }
      for (auto sl : touched) {
        a1[sl] += cnt[sl];
        a2[sl] += cnt[sl] * cnt[sl];
        cnt[sl] = 0;
      }
    }
  };
  run_rows(threads, nblocks, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t b = lo; b < hi; ++b) body(b);
  });
  MonteCarloResult r;
  r.targets = targets;
  r.paths = n_paths;
  r.mean.assign(T, 0.0);
  r.stderr_.assign(T, 0.0);
  for (std::uint64_t b = 0; b < nblocks; ++b) r.capped += capped[b];
  const double N = double(n_paths);
  for (std::size_t i = 0; i < T; ++i) {
    unsigned __int128 a = 0, q = 0;
    for (std::uint64_t b = 0; b < nblocks; ++b) {
      a += s1sum[b * T + i];
      q += s2sum[b * T + i];
    }
    double mean = double(a) / N;
    double var = n_paths > 1 ? std::max(0.0, (double(q) / N - mean * mean) * N / (N - 1)) : 0.0;
    r.mean[i] = mean;
    r.stderr_[i] = std::sqrt(var / N);
  }
  return r;
}

// ---------------------------------------------------------------- reachability

ReachabilityReport reachability(const WalkModel& m, Box box) {
  const std::size_t n = box.size();
  std::vector<std::vector<std::uint32_t>> out(n);
  for (int k2 = 0; k2 <= box.ky; ++k2)
    for (int k1 = 0; k1 <= box.kx; ++k1)
      for (const auto& e : m.measure_at(k1, k2).entries()) {
        int t1 = k1 + e.dx, t2 = k2 + e.dy;
        if ((t1 == 0 && t2 == 0) || !box.contains(t1, t2)) continue;
        out[box.index(k1, k2)].push_back(std::uint32_t(box.index(t1, t2)));
      }
  auto bfs = [&](std::size_t s) {
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> q{s};
    seen[s] = 1;
    while (!q.empty()) {
      auto u = q.front();
      q.pop_front();
      for (auto v : out[u])
        if (!seen[v]) {
          seen[v] = 1;
          q.push_back(v);
        }
    }
    return seen;
  };
  // sources live in the inner half of the box; the far set is its complement
  const int R = std::max(1, std::min(box.kx, box.ky) / 2);
  auto norm = [](int a, int b) { return std::max(a, b); };
  ReachabilityReport rep;
  rep.box = box;
  std::vector<std::vector<char>> reach;
  for (int k2 = 0; k2 < R; ++k2)
    for (int k1 = 0; k1 < R; ++k1) {
      auto seen = bfs(box.index(k1, k2));
      bool far = false;
      for (int t2 = 0; t2 <= box.ky && !far; ++t2)
        for (int t1 = 0; t1 <= box.kx; ++t1)
          if (norm(t1, t2) >= R && seen[box.index(t1, t2)]) {
            far = true;
            break;
          }
      if (!far) rep.E0.push_back({k1, k2});
      else reach.push_back(std::move(seen));
    }
  int n0 = 0;
  for (int t2 = 0; t2 <= box.ky; ++t2)
    for (int t1 = 0; t1 <= box.kx; ++t1) {
      if (norm(t1, t2) > R) continue;
      for (const auto& seen : reach)
        if (!seen[box.index(t1, t2)]) {
          n0 = std::max(n0, norm(t1, t2) + 1);
          break;
        }
    }
  rep.N0 = n0;
  return rep;
}

// ------------------------------------------------------------------------ CSV

void write_green_csv(std::ostream& out, const GreenTable& t) {
  out << "k1,k2,value,tail_bound\n";
  for (int k2 = 0; k2 <= t.box.ky; ++k2)
    for (int k1 = 0; k1 <= t.box.kx; ++k1)
      out << k1 << ',' << k2 << ',' << fmt_full(t.value(k1, k2)) << ','
          << fmt_full(t.bound(k1, k2)) << '\n';
}

GreenTable read_green_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "k1,k2,value,tail_bound")
    throw GreenError(GreenError::Kind::InvalidArgument, "bad green CSV header");
  std::vector<std::tuple<int, int, double, double>> rows;
  int kx = 0, ky = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c, d;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    std::getline(ss, d, ',');
    try {
      rows.emplace_back(std::stoi(a), std::stoi(b), std::stod(c), std::stod(d));
    } catch (const std::exception&) {
      throw GreenError(GreenError::Kind::InvalidArgument, "bad green CSV row: " + line);
    }
    kx = std::max(kx, std::get<0>(rows.back()));
    ky = std::max(ky, std::get<1>(rows.back()));
  }
  GreenTable t;
  t.box = Box{kx, ky};
  if (rows.size() != t.box.size())
    throw GreenError(GreenError::Kind::InvalidArgument, "green CSV is not a full box");
  t.values.assign(t.box.size(), 0.0);
  t.tail_bound.assign(t.box.size(), 0.0);
  for (auto& [k1, k2, v, tb] : rows) {
    if (k1 < 0 || k2 < 0) throw GreenError(GreenError::Kind::InvalidArgument, "negative index");
    t.values[t.box.index(k1, k2)] = v;
    t.tail_bound[t.box.index(k1, k2)] = tb;
  }
  return t;
}

}  // namespace qwalk
