#pragma once

#include <string_view>

namespace dpnls {

/// Exponents of the nonlinearity +|u|^{p-1}u - |u|^{q-1}u.
struct ModelParams {
  double p = 2.0;
  double q = 3.0;
};

/// Throws PreconditionError unless 1 < p < q (and both finite).
ModelParams make_params(double p, double q);

/// Additionally requires q < 5, the range in which the unstable direction
/// and the evolution experiments are defined.
void require_subcritical(const ModelParams& params);

// Scalar functions of s = phi^2.
double f_eval(double s, const ModelParams& params);
double w_eval(double s, double omega, const ModelParams& params);
double w_s_eval(double s, double omega, const ModelParams& params);

/// Unique positive zero a(omega) of W(.; omega).
double a_omega(double omega, const ModelParams& params);
double a_prime(double omega, const ModelParams& params);
double b_omega(double omega, const ModelParams& params);
double b_prime(double omega, const ModelParams& params);

/// Half-width scale of phi_0 when q = 2p - 1; used to make R schedules and
/// box sizes comparable across exponents.
double characteristic_length(const ModelParams& params);

enum class StabilityTag {
  MassDerivPositive,
  MassDerivZero,
  MassDerivNegativeFinite,
  MassDerivMinusInfinity,
};

std::string_view to_string(StabilityTag tag);

struct StabilityClass {
  StabilityTag tag = StabilityTag::MassDerivPositive;
  double two_p_plus_q = 0.0;
  double gamma1_threshold = 0.0;
};

double gamma1(double p);

/// Sign of the one-sided limit M'(0) as a function of (p, q).
/// Points within 1e-12 of the line 2p + q = 7 are labelled MassDerivZero.
StabilityClass classify(const ModelParams& params);

/// True when the classification predicts M'(0) in [-inf, 0).
bool mass_derivative_negative(const StabilityClass& cls);

}  // namespace dpnls
