#include "qwalk/numeric.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace qwalk {

// Shewchuk partials with the final half-even correction used by Python's fsum.
void ExactSum::add(double x) {
  std::size_t i = 0;
  for (double y : partials_) {
    if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
    double hi = x + y;
    double lo = y - (hi - x);
    if (lo != 0.0) partials_[i++] = lo;
    x = hi;
  }
  partials_.resize(i);
  partials_.push_back(x);
}

double ExactSum::value() const {
  if (partials_.empty()) return 0.0;
  std::size_t n = partials_.size();
  double hi = partials_[--n];
  double lo = 0.0;
  while (n > 0) {
    double x = hi;
    double y = partials_[--n];
    hi = x + y;
    double yr = hi - x;
    lo = y - yr;
    if (lo != 0.0) break;
  }
  if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                (lo > 0.0 && partials_[n - 1] > 0.0))) {
    double y = lo * 2.0;
    double x = hi + y;
    double yr = x - hi;
    if (y == yr) hi = x;
  }
  return hi;
}

double exact_sum(std::span<const double> terms) {
  ExactSum acc;
  for (double t : terms) acc.add(t);
  return acc.value();
}

Bracket bisect(const std::function<double(double)>& f, double lo, double hi,
               double rel_tol, double abs_tol, int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return {lo, lo, 0};
  if (fhi == 0.0) return {hi, hi, 0};
  if ((flo > 0.0) == (fhi > 0.0))
    throw NumericError(fmt::format("bisect: no sign change on [{}, {}]", lo, hi));
  Bracket b{lo, hi, 0};
  for (; b.iterations < max_iter; ++b.iterations) {
    double mid = 0.5 * (b.lo + b.hi);
    if (mid <= b.lo || mid >= b.hi) break;
    if (b.hi - b.lo <= abs_tol + rel_tol * std::fabs(mid)) break;
    double fm = f(mid);
    if (fm == 0.0) return {mid, mid, b.iterations + 1};
    if ((fm > 0.0) == (flo > 0.0)) {
      b.lo = mid;
      flo = fm;
    } else {
      b.hi = mid;
    }
  }
  return b;
}

double golden_min(const std::function<double(double)>& f, double lo, double hi,
                  double tol, int max_iter) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol * (1.0 + std::fabs(c)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

double richardson(std::span<const double> values, int order) {
  std::vector<double> t(values.begin(), values.end());
  if (t.empty()) throw NumericError("richardson: no samples");
  int levels = std::min<int>(order, static_cast<int>(t.size()) - 1);
  for (int l = 1; l <= levels; ++l) {
    double p = std::ldexp(1.0, l);
    for (std::size_t i = t.size() - 1; i >= static_cast<std::size_t>(l); --i)
      t[i] = (p * t[i] - t[i - 1]) / (p - 1.0);
  }
  return t.back();
}

std::string fmt_full(double v) { return fmt::format("{:.17g}", v); }
std::string fmt_short(double v) { return fmt::format("{:.12g}", v); }

}  // namespace qwalk
