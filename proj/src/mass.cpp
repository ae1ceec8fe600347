#include "dpnls/mass.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "dpnls/errors.hpp"

namespace dpnls {

namespace {

void require_positive_s(double s, const char* what) {
  if (!(s > 0.0)) {
    std::ostringstream msg;
    msg << what << ": s must be > 0, got " << s;
    throw PreconditionError(msg.str());
  }
}

bool at_or_above_seven_thirds(double p) { return 3.0 * p >= 7.0; }

}  // namespace

double j_eval(double s, const ModelParams& params) {
  require_positive_s(s, "j_eval");
  const double p = params.p;
  const double q = params.q;
  return -2.0 / (p + 1.0) * std::pow(s, 0.5 * (p - 1.0)) +
         2.0 / (q + 1.0) * std::pow(s, 0.5 * (q - 1.0));
}

double k_eval(double s, const ModelParams& params) {
  require_positive_s(s, "k_eval");
  const double p = params.p;
  const double q = params.q;
  return -(5.0 - p) / (p + 1.0) * std::pow(s, 0.5 * (p - 1.0)) +
         (5.0 - q) / (q + 1.0) * std::pow(s, 0.5 * (q - 1.0));
}

std::string_view to_string(MassMethod m) {
  switch (m) {
    case MassMethod::IntegralFormula:
      return "IntegralFormula";
    case MassMethod::FiniteDifference:
      return "FiniteDifference";
    case MassMethod::PairingIntegral:
      return "PairingIntegral";
  }
  return "unknown";
}

double mass(double omega, const ModelParams& params, ProfileOptions options) {
  const ModelParams pq = make_params(params.p, params.q);
  if (omega == 0.0 && !(pq.p < 5.0)) {
    std::ostringstream msg;
    msg << "mass: phi_0 is not square integrable for p >= 5, got p=" << pq.p;
    throw PreconditionError(msg.str());
  }
  const ProfileEvaluator ev(pq, omega, options);
  const double a = ev.a();
  const auto r = ev.integrate_x(0.0, std::numeric_limits<double>::infinity(),
                                [a](const ProfilePoint& pt) { return a * pt.coord.tau; });
  return r.value;
}

MassDerivative mass_prime(double omega, const ModelParams& params,
                          ProfileOptions options) {
  const ModelParams pq = make_params(params.p, params.q);
  MassDerivative out;
  if (omega == 0.0) {
    if (at_or_above_seven_thirds(pq.p)) {
      out.minus_infinity = true;
      out.value = -std::numeric_limits<double>::infinity();
      return out;
    }
    out.near_divergence = 3.0 * pq.p >= 7.0 - 0.15;
  }
  const ScaledFunctions fns(pq, omega, a_omega(omega, pq));
  const double a = fns.a();
  // (K(a) - K(as)) / D^{3/2} |ds/dsigma|
  auto integrand = [&](double sigma) {
    const TauCoord c = tau_coord(sigma);
    const double d = fns.d(c);
    return fns.k_diff(c) / (d * std::sqrt(d)) * c.ds_dsigma;
  };
  quad::Options opt;
  opt.rel_tol = options.quad_tol;
  opt.abs_tol = 1e-300;
  opt.max_intervals = 20000;
  opt.l1_relative = true;
  const double sigma_max = tail_sigma_max(pq, omega);
  const std::array<double, 3> pts{0.0, kSigmaSplit, sigma_max};
  auto r = quad::integrate(integrand, std::span<const double>(pts), opt);
  // remaining tail: the integrand decays like exp(-kappa t)
  const double f_end = integrand(sigma_max);
  if (f_end != 0.0) {
    double kappa;
    if (omega == 0.0) {
      kappa = 1.0 - 0.75 * (pq.p - 1.0);
    } else {
      kappa = 1.0;  // D -> omega, integrand ~ s
    }
    r.value += f_end / kappa;
  }
  out.value = -a / (4.0 * fns.w_s_at_a()) * r.value;
  return out;
}

double mass_prime_fd(double omega, double h, const ModelParams& params,
                     ProfileOptions options) {
  if (!(h > 0.0) || !(omega > h)) {
    std::ostringstream msg;
    msg << "mass_prime_fd: need omega > h > 0, got omega=" << omega
        << ", h=" << h;
    throw PreconditionError(msg.str());
  }
  return (mass(omega + h, params, options) - mass(omega - h, params, options)) /
         (2.0 * h);
}

double pairing_partial(const EtaZero& e, double R) {
  if (!(R >= 0.0)) throw PreconditionError("pairing_partial: R must be >= 0");
  const ProfileEvaluator& ev = e.profile0;
  const auto r = ev.integrate_x(
      0.0, R,
      [&](const ProfilePoint& pt) { return ev.phi(pt) * eta0_at(pt, e); }, true);
  return 2.0 * r.value;
}

MassDerivative pairing_integral(const EtaZero& e) {
  MassDerivative out;
  const ProfileEvaluator& ev = e.profile0;
  if (at_or_above_seven_thirds(e.params.p)) {
    // confirm eventual negativity and unbounded partial integrals
    double R = 100.0 * characteristic_length(e.params);
    bool witnessed = false;
    for (int i = 0; i < 60 && !ev.is_tail_extrapolated(R); ++i, R *= 4.0) {
      if (eta0(R, e) < 0.0 && pairing_partial(e, R) < -10.0) {
        witnessed = true;
        break;
      }
    }
    if (!witnessed) {
      std::ostringstream msg;
      msg << "pairing_integral: no divergence witness for p=" << e.params.p
          << " up to R=" << R;
      throw NumericalError(msg.str());
    }
    out.minus_infinity = true;
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  out.near_divergence = 3.0 * e.params.p >= 7.0 - 0.15;
  const auto r = ev.integrate_x(
      0.0, std::numeric_limits<double>::infinity(),
      [&](const ProfilePoint& pt) { return ev.phi(pt) * eta0_at(pt, e); }, true);
  out.value = 2.0 * r.value;
  return out;
}

MassDerivative pairing_integral(const ModelParams& params) {
  return pairing_integral(make_eta_zero(params));
}

MassReport mass_report(double omega, const ModelParams& params,
                       MassMethod method, ProfileOptions options) {
  MassReport rep;
  rep.omega = omega;
  rep.method = method;
  rep.mass = mass(omega, params, options);
  switch (method) {
    case MassMethod::IntegralFormula:
      rep.mass_prime = mass_prime(omega, params, options);
      break;
    case MassMethod::FiniteDifference: {
      const double h = std::min(1e-3, 0.5 * omega);
      rep.mass_prime.value = mass_prime_fd(omega, h, params, options);
      break;
    }
    case MassMethod::PairingIntegral:
      if (omega != 0.0) {
        throw PreconditionError("mass_report: the pairing integral is the omega = 0 value");
      }
      rep.mass_prime = pairing_integral(make_eta_zero(params, options));
      break;
  }
  return rep;
}

}  // namespace dpnls
