#include "dpnls/model.hpp"

#include <cmath>
#include <sstream>

#include "dpnls/errors.hpp"
#include "dpnls/roots.hpp"

namespace dpnls {

ModelParams make_params(double p, double q) {
  if (!std::isfinite(p) || !std::isfinite(q) || !(p > 1.0) || !(q > p)) {
    std::ostringstream msg;
    msg << "exponents must satisfy 1 < p < q, got p=" << p << ", q=" << q;
    throw PreconditionError(msg.str());
  }
  return {p, q};
}

void require_subcritical(const ModelParams& params) {
  make_params(params.p, params.q);
  if (!(params.q < 5.0)) {
    std::ostringstream msg;
    msg << "q must be < 5 for this operation, got q=" << params.q;
    throw PreconditionError(msg.str());
  }
}

namespace {

void require_nonneg(double s, const char* what) {
  if (!(s >= 0.0)) {
    std::ostringstream msg;
    msg << what << ": argument must be >= 0, got " << s;
    throw PreconditionError(msg.str());
  }
}

}  // namespace

double f_eval(double s, const ModelParams& params) {
  require_nonneg(s, "f_eval");
  return std::pow(s, 0.5 * (params.p - 1.0)) -
         std::pow(s, 0.5 * (params.q - 1.0));
}

double w_eval(double s, double omega, const ModelParams& params) {
  require_nonneg(s, "w_eval");
  const double p = params.p;
  const double q = params.q;
  return omega * s + 2.0 / (p + 1.0) * std::pow(s, 0.5 * (p + 1.0)) -
         2.0 / (q + 1.0) * std::pow(s, 0.5 * (q + 1.0));
}

double w_s_eval(double s, double omega, const ModelParams& params) {
  return omega + f_eval(s, params);
}

double a_omega(double omega, const ModelParams& params) {
  if (!(omega >= 0.0) || !std::isfinite(omega)) {
    std::ostringstream msg;
    msg << "a_omega: omega must be finite and >= 0, got " << omega;
    throw PreconditionError(msg.str());
  }
  const double p = params.p;
  const double q = params.q;
  const double a0 = std::pow((q + 1.0) / (p + 1.0), 2.0 / (q - p));
  if (omega == 0.0) return a0;

  // W(a0; omega) = omega * a0 > 0 and W -> -inf, so double until negative.
  double hi = 2.0 * a0;
  int doublings = 0;
  while (w_eval(hi, omega, params) >= 0.0) {
    hi *= 2.0;
    if (++doublings > 2000 || !std::isfinite(hi)) {
      std::ostringstream msg;
      msg << "a_omega: failed to bracket the zero of W for omega=" << omega
          << ", p=" << p << ", q=" << q << ", last hi=" << hi;
      throw NumericalError(msg.str());
    }
  }
  auto fdf = [&](double s) {
    return std::pair{w_eval(s, omega, params), w_s_eval(s, omega, params)};
  };
  const auto res = roots::bracketed_newton(fdf, a0, hi, hi, 1e-13 * a0);
  // one polishing Newton step; the bracket stop can leave ~xtol error
  const auto [w, ws] = fdf(res.x);
  const double polished = res.x - w / ws;
  return std::abs(polished - res.x) < 1e-12 * a0 ? polished : res.x;
}

double a_prime(double omega, const ModelParams& params) {
  const double a = a_omega(omega, params);
  return -a / w_s_eval(a, omega, params);
}

double b_omega(double omega, const ModelParams& params) {
  return 2.0 / std::sqrt(a_omega(omega, params));
}

double b_prime(double omega, const ModelParams& params) {
  const double a = a_omega(omega, params);
  const double ap = -a / w_s_eval(a, omega, params);
  return -ap * std::pow(a, -1.5);
}

double characteristic_length(const ModelParams& params) {
  const double p = params.p;
  return std::sqrt((p + 1.0) * (p + 1.0) / p) / (p - 1.0);
}

std::string_view to_string(StabilityTag tag) {
  switch (tag) {
    case StabilityTag::MassDerivPositive:
      return "MassDerivPositive";
    case StabilityTag::MassDerivZero:
      return "MassDerivZero";
    case StabilityTag::MassDerivNegativeFinite:
      return "MassDerivNegativeFinite";
    case StabilityTag::MassDerivMinusInfinity:
      return "MassDerivMinusInfinity";
  }
  return "unknown";
}

double gamma1(double p) { return (23.0 - 3.0 * p) / (3.0 + p); }

StabilityClass classify(const ModelParams& params) {
  make_params(params.p, params.q);
  StabilityClass cls;
  cls.two_p_plus_q = 2.0 * params.p + params.q;
  cls.gamma1_threshold = gamma1(params.p);
  // 3p >= 7 is the exact form of p >= 7/3
  if (3.0 * params.p >= 7.0) {
    cls.tag = StabilityTag::MassDerivMinusInfinity;
  } else if (std::abs(cls.two_p_plus_q - 7.0) <= 1e-12) {
    cls.tag = StabilityTag::MassDerivZero;
  } else if (cls.two_p_plus_q < 7.0) {
    cls.tag = StabilityTag::MassDerivPositive;
  } else {
    cls.tag = StabilityTag::MassDerivNegativeFinite;
  }
  return cls;
}

bool mass_derivative_negative(const StabilityClass& cls) {
  return cls.tag == StabilityTag::MassDerivNegativeFinite ||
         cls.tag == StabilityTag::MassDerivMinusInfinity;
}

}  // namespace dpnls
