#include "dpnls/eta.hpp"

#include <cmath>
#include <sstream>

#include "dpnls/errors.hpp"

namespace dpnls {

namespace {

// below this |x| the derivative formula is a 0/0 quotient
constexpr double kTaylorRadius = 1e-4;

}  // namespace

EtaZero make_eta_zero(const ModelParams& params, ProfileOptions options) {
  EtaZero e{params, ProfileEvaluator(params, 0.0, options)};
  e.params = e.profile0.params();
  e.a0 = e.profile0.a();
  e.b0 = e.profile0.b();
  e.a0_prime = a_prime(0.0, e.params);
  e.b0_prime = b_prime(0.0, e.params);
  e.eta_at_zero = e.a0_prime / (2.0 * std::sqrt(e.a0));
  const double phi = std::sqrt(e.a0);
  const double p = e.params.p;
  const double q = e.params.q;
  e.eta_pp_at_zero =
      (p * std::pow(phi, p - 1.0) - q * std::pow(phi, q - 1.0)) * e.eta_at_zero +
      phi;
  return e;
}

double eta0_at(const ProfilePoint& pt, const EtaZero& e) {
  if (pt.coord.sigma == 0.0) return e.eta_at_zero;
  if (pt.extrapolated || !std::isfinite(pt.H)) {
    std::ostringstream msg;
    msg << "eta0: x=" << pt.x << " lies beyond the representable tail";
    throw NumericalError(msg.str());
  }
  const ProfileEvaluator& ev = e.profile0;
  const double tau = pt.coord.tau;
  const double num = e.a0_prime * tau + e.a0 * e.b0_prime * pt.x * ev.G_z(pt) +
                     e.a0 * ev.G_omega(pt);
  return num / (2.0 * ev.phi(pt));
}

double eta0(double x, const EtaZero& e) {
  const double ax = std::abs(x);
  if (ax == 0.0) return e.eta_at_zero;
  return eta0_at(e.profile0.point_at_x(ax, true), e);
}

double eta0_prime_at(const ProfilePoint& pt, const EtaZero& e) {
  if (pt.x < kTaylorRadius) return e.eta_pp_at_zero * pt.x;
  const ProfileEvaluator& ev = e.profile0;
  const double phi = ev.phi(pt);
  const double phi2 = phi * phi;
  const double eta = eta0_at(pt, e);
  const double ws = f_eval(phi2, e.params);
  // sqrt(W(phi^2; 0)) = -phi'
  const double root_w = -ev.phi_prime(pt);
  return -(2.0 * ws * phi * eta + phi2) / (2.0 * root_w);
}

double eta0_prime(double x, const EtaZero& e) {
  if (x == 0.0) return 0.0;
  const double v = eta0_prime_at(e.profile0.point_at_x(std::abs(x), true), e);
  return x > 0.0 ? v : -v;
}

double eta0_closed_form(double x, const ModelParams& params) {
  const double p = params.p;
  if (std::abs(params.q - (2.0 * p - 1.0)) >= 1e-12) {
    std::ostringstream msg;
    msg << "eta0_closed_form requires q = 2p - 1, got p=" << p
        << ", q=" << params.q;
    throw PreconditionError(msg.str());
  }
  const double x2 = x * x;
  const double pm = p - 1.0;
  const double pp = p + 1.0;
  const double base = 2.0 * pp / (pp * pp / p + pm * pm * x2);
  const double poly = std::pow(pp, 4) / (8.0 * p * p) -
                      pm * pm * pp * pp * x2 / (4.0 * p) -
                      std::pow(pm, 4) * x2 * x2 / 24.0;
  return std::pow(base, 1.0 / pm + 1.0) * poly / (pm * pp);
}

double eta_fd(double x, double omega, const ModelParams& params) {
  if (!(omega > 0.0)) {
    std::ostringstream msg;
    msg << "eta_fd: omega must be > 0, got " << omega;
    throw PreconditionError(msg.str());
  }
  const ProfileEvaluator ev0(params, 0.0);
  const ProfileEvaluator ev(params, omega);
  return (ev.phi(x) - ev0.phi(x)) / omega;
}

double residual_linearized(std::span<const double> x_grid,
                           const ModelParams& params,
                           const std::function<double(double)>& phi,
                           const std::function<double(double)>& eta,
                           double h) {
  if (!(h > 0.0)) throw PreconditionError("residual_linearized: h must be > 0");
  double worst = 0.0;
  for (double x : x_grid) {
    if (std::abs(x) < 2.0 * h) {
      std::ostringstream msg;
      msg << "residual_linearized: grid point " << x
          << " is within 2h of the origin";
      throw PreconditionError(msg.str());
    }
    const double e0 = eta(x);
    const double d2 = (-eta(x + 2 * h) + 16.0 * eta(x + h) - 30.0 * e0 +
                       16.0 * eta(x - h) - eta(x - 2 * h)) /
                      (12.0 * h * h);
    const double f = phi(x);
    const double r = -d2 + params.p * std::pow(f, params.p - 1.0) * e0 -
                     params.q * std::pow(f, params.q - 1.0) * e0 + f;
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

double residual_linearized(std::span<const double> x_grid, const EtaZero& e,
                           double h) {
  return residual_linearized(
      x_grid, e.params, [&](double x) { return e.profile0.phi(x); },
      [&](double x) { return eta0(x, e); }, h);
}

EtaDecayFit decay_exponent_eta(const EtaZero& e, double X) {
  if (!(X > 0.0)) throw PreconditionError("decay_exponent_eta: X must be > 0");
  EtaDecayFit fit;
  constexpr int kSamples = 41;
  const double l0 = std::log(X);
  const double l1 = std::log(4.0 * X);
  double prev = 0.0;
  double prev_x = X;
  for (int i = 0; i < kSamples; ++i) {
    const double x = std::exp(l0 + (l1 - l0) * i / (kSamples - 1));
    const double v = eta0(x, e);
    if (i > 0 && (v > 0.0) != (prev > 0.0)) {
      fit.rejected = true;
      fit.last_sign_change = 0.5 * (x + prev_x);
    }
    prev = v;
    prev_x = x;
  }
  fit.value_at_end = prev;
  fit.sign = prev < 0.0 ? -1 : 1;
  if (!fit.rejected) {
    fit.exponent = loglog_slope([&](double x) { return eta0(x, e); }, X,
                                4.0 * X, kSamples);
  } else {
    fit.exponent = std::nan("");
  }
  return fit;
}

}  // namespace dpnls
