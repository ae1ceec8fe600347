#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <sstream>
#include <vector>

#include "dpnls/errors.hpp"

namespace dpnls::quad {

struct Options {
  double abs_tol = 1e-14;
  double rel_tol = 1e-12;
  int max_intervals = 4000;
  bool throw_on_failure = true;
  // measure rel_tol against int |f| instead of |int f| (for integrals that
  // cancel to zero)
  bool l1_relative = false;
};

struct Result {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
  bool converged = true;
  // subinterval carrying the largest error estimate at exit
  double worst_lo = 0.0;
  double worst_hi = 0.0;
};

struct Panel {
  double value = 0.0;
  double error = 0.0;
  double abs_value = 0.0;
};

namespace detail {

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208606840300, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Interval {
  double lo;
  double hi;
  double value;
  double error;
  double abs_value;
  bool operator<(const Interval& other) const { return error < other.error; }
};

}  // namespace detail

/// Single 21-point Gauss-Kronrod panel with the QUADPACK error heuristic.
template <class F>
Panel gk21(F&& f, double a, double b) {
  using namespace detail;
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double resg = 0.0;
  double resk = kWgk[10] * fc;
  double resabs = std::abs(resk);
  std::array<double, 10> f1{};
  std::array<double, 10> f2{};
  for (int j = 0; j < 10; ++j) {
    const double dx = half * kXgk[j];
    f1[j] = f(center - dx);
    f2[j] = f(center + dx);
    const double sum = f1[j] + f2[j];
    resk += kWgk[j] * sum;
    resabs += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) resg += kWg[j / 2] * sum;
  }
  const double mean = 0.5 * resk;
  double resasc = kWgk[10] * std::abs(fc - mean);
  for (int j = 0; j < 10; ++j) {
    resasc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
  }
  const double ah = std::abs(half);
  resk *= half;
  resg *= half;
  resabs *= ah;
  resasc *= ah;
  double err = std::abs(resk - resg);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  err = std::max(err, 4.0 * std::numeric_limits<double>::epsilon() * resabs);
  return {resk, err, resabs};
}

/// Globally adaptive Gauss-Kronrod integration over [a, b] with the given
/// interior breakpoints (sorted, strictly inside). Bisects the panel with the
/// largest error estimate until error <= max(abs_tol, rel_tol * |value|).
template <class F>
Result integrate(F&& f, std::span<const double> points, const Options& opt = {}) {
  using detail::Interval;
  std::priority_queue<Interval> heap;
  double total_err = 0.0;
  double total_abs = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double lo = points[i];
    const double hi = points[i + 1];
    if (!(hi > lo)) continue;
    const Panel pan = gk21(f, lo, hi);
    heap.push({lo, hi, pan.value, pan.error, pan.abs_value});
    total_err += pan.error;
    total_abs += pan.abs_value;
  }
  auto sum_values = [&heap]() {
    // Neumaier summation over a copy of the heap contents
    auto copy = heap;
    double s = 0.0;
    double c = 0.0;
    while (!copy.empty()) {
      const double v = copy.top().value;
      copy.pop();
      const double t = s + v;
      c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
      s = t;
    }
    return s + c;
  };
  double total = sum_values();
  Result out;
  const double eps = std::numeric_limits<double>::epsilon();
  auto tolerance = [&]() {
    const double scale = opt.l1_relative ? total_abs : std::abs(total);
    return std::max(opt.abs_tol, opt.rel_tol * scale);
  };
  int n_intervals = static_cast<int>(heap.size());
  bool stuck = false;
  while (!heap.empty() && total_err > tolerance()) {
    if (n_intervals >= opt.max_intervals) break;
    const Interval worst = heap.top();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi) ||
        (worst.hi - worst.lo) < 64.0 * eps * std::max(std::abs(mid), 1e-300)) {
      stuck = true;
      break;
    }
    heap.pop();
    const Panel left = gk21(f, worst.lo, mid);
    const Panel right = gk21(f, mid, worst.hi);
    heap.push({worst.lo, mid, left.value, left.error, left.abs_value});
    heap.push({mid, worst.hi, right.value, right.error, right.abs_value});
    total_abs += (left.abs_value + right.abs_value) - worst.abs_value;
    total += (left.value + right.value) - worst.value;
    total_err += (left.error + right.error) - worst.error;
    ++n_intervals;
  }
  out.value = sum_values();
  // recompute the error sum to shed accumulated cancellation
  {
    auto copy = heap;
    double e = 0.0;
    while (!copy.empty()) {
      e += copy.top().error;
      copy.pop();
    }
    out.error = e;
  }
  out.intervals = n_intervals;
  const double tol = std::max(
      opt.abs_tol,
      opt.rel_tol * (opt.l1_relative ? total_abs : std::abs(out.value)));
  out.converged = out.error <= tol;
  if (!heap.empty()) {
    out.worst_lo = heap.top().lo;
    out.worst_hi = heap.top().hi;
  }
  if (!std::isfinite(out.value)) out.converged = false;
  if (!out.converged && opt.throw_on_failure) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "adaptive quadrature did not converge"
        << (stuck ? " (interval too small to bisect)" : "")
        << ": value=" << out.value << ", error=" << out.error
        << ", tolerance=" << tol << ", intervals=" << out.intervals
        << ", worst subinterval=[" << out.worst_lo << ", " << out.worst_hi
        << "]";
    throw NumericalError(msg.str());
  }
  return out;
}

template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
  const std::array<double, 2> pts{a, b};
  return integrate(std::forward<F>(f), std::span<const double>(pts), opt);
}

}  // namespace dpnls::quad
