#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qwalk {

// Correctly rounded sum of a finite set of doubles. The result does not
// depend on the order of the inputs.
double exact_sum(std::span<const double> terms);

// Accumulator form of exact_sum.
class ExactSum {
 public:
  void add(double v);
  double value() const;
  void clear() { partials_.clear(); }

 private:
  std::vector<double> partials_;
};

// x^n by repeated squaring; deterministic for every n.
inline double ipow(double x, int n) {
  if (n < 0) return 1.0 / ipow(x, -n);
  double r = 1.0;
  double b = x;
  while (n > 0) {
    if (n & 1) r *= b;
    b *= b;
    n >>= 1;
  }
  return r;
}

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
  int iterations = 0;
};

// Bisection for a sign change of f on [lo, hi]. Stops when the bracket
// width is below abs_tol + rel_tol * |mid| or no double lies strictly inside.
Bracket bisect(const std::function<double(double)>& f, double lo, double hi,
               double rel_tol = 1e-15, double abs_tol = 0.0, int max_iter = 400);

// Minimizer of a unimodal function on [lo, hi] by golden section.
double golden_min(const std::function<double(double)>& f, double lo, double hi,
                  double tol = 1e-12, int max_iter = 300);

// Order-2 Richardson extrapolation of samples f(h_m) with h_{m+1} = h_m / 2
// assuming f(h) = L + c1 h + c2 h^2 + ...
double richardson(std::span<const double> values, int order = 2);

// Shortest round-trip decimal for files and fixed precision for terminals.
std::string fmt_full(double v);
std::string fmt_short(double v);

}  // namespace qwalk
