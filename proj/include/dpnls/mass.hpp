#pragma once

#include <string>
#include <string_view>

#include "dpnls/eta.hpp"
#include "dpnls/model.hpp"
#include "dpnls/profile.hpp"

namespace dpnls {

double j_eval(double s, const ModelParams& params);
double k_eval(double s, const ModelParams& params);

/// A mass-derivative value that may be the tagged "minus infinity" outcome.
struct MassDerivative {
  double value = 0.0;
  bool minus_infinity = false;
  // set when p is within 0.05 below 7/3 at omega = 0
  bool near_divergence = false;

  bool negative() const { return minus_infinity || value < 0.0; }
};

enum class MassMethod { IntegralFormula, FiniteDifference, PairingIntegral };
std::string_view to_string(MassMethod m);

struct MassReport {
  double omega = 0.0;
  double mass = 0.0;
  MassDerivative mass_prime;
  MassMethod method = MassMethod::IntegralFormula;
};

/// M(omega) = (1/2) ||phi_omega||^2.
double mass(double omega, const ModelParams& params, ProfileOptions options = {});
MassDerivative mass_prime(double omega, const ModelParams& params,
                          ProfileOptions options = {});
double mass_prime_fd(double omega, double h, const ModelParams& params,
                     ProfileOptions options = {});

/// int phi_0 eta_0 over the line.
MassDerivative pairing_integral(const EtaZero& e);
MassDerivative pairing_integral(const ModelParams& params);
/// 2 int_0^R phi_0 eta_0; the divergence witness for p >= 7/3.
double pairing_partial(const EtaZero& e, double R);

MassReport mass_report(double omega, const ModelParams& params,
                       MassMethod method = MassMethod::IntegralFormula,
                       ProfileOptions options = {});

}  // namespace dpnls
