#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "dpnls/errors.hpp"

namespace dpnls::roots {

struct NewtonResult {
  double x = 0.0;
  int iterations = 0;
};

/// Safeguarded Newton iteration for a root of a function that changes sign
/// on [lo, hi]. `fdf(x)` returns {f(x), f'(x)}. Steps that leave the current
/// bracket (or fail to halve it every few iterations) fall back to bisection.
/// Iterates until the step is below `xtol` or the bracket collapses.
template <class FDF>
NewtonResult bracketed_newton(FDF&& fdf, double lo, double hi, double x0,
                              double xtol, int max_iter = 100) {
  auto [flo, dflo] = fdf(lo);
  auto [fhi, dfhi] = fdf(hi);
  (void)dflo;
  (void)dfhi;
  if (flo == 0.0) return {lo, 0};
  if (fhi == 0.0) return {hi, 0};
  if ((flo > 0.0) == (fhi > 0.0)) {
    std::ostringstream msg;
    msg << "bracketed_newton: root not bracketed on [" << lo << ", " << hi
        << "], f(lo)=" << flo << ", f(hi)=" << fhi;
    throw NumericalError(msg.str());
  }
  const bool increasing = fhi > 0.0;
  double x = (x0 > lo && x0 < hi) ? x0 : 0.5 * (lo + hi);
  double last_width = hi - lo;
  for (int it = 1; it <= max_iter; ++it) {
    auto [fx, dfx] = fdf(x);
    if (fx == 0.0) return {x, it};
    if ((fx > 0.0) == increasing) {
      hi = x;
    } else {
      lo = x;
    }
    double next = x - fx / dfx;
    bool bisect = !std::isfinite(next) || next <= lo || next >= hi;
    if (it % 4 == 0) {
      // every fourth iteration the bracket must have at least halved
      if (hi - lo > 0.5 * last_width) bisect = true;
      last_width = hi - lo;
    }
    if (bisect) next = 0.5 * (lo + hi);
    const double step = std::abs(next - x);
    x = next;
    if (step <= xtol || hi - lo <= xtol) return {x, it};
  }
  std::ostringstream msg;
  msg << "bracketed_newton: no convergence after " << max_iter
      << " iterations, bracket [" << lo << ", " << hi << "]";
  throw NumericalError(msg.str());
}

/// Plain bisection to absolute tolerance; used where no derivative exists.
template <class F>
double bisect(F&& f, double lo, double hi, double xtol, int max_iter = 400) {
  double flo = f(lo);
  const double fhi = f(hi);
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw NumericalError("bisect: root not bracketed");
  }
  for (int it = 0; it < max_iter && hi - lo > xtol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace dpnls::roots
