#pragma once

#include <functional>
#include <optional>
#include <span>

#include "dpnls/model.hpp"
#include "dpnls/profile.hpp"

namespace dpnls {

/// The one-sided omega-derivative of phi_omega at omega = 0.
struct EtaZero {
  ModelParams params;
  ProfileEvaluator profile0;
  double a0 = 0.0;
  double a0_prime = 0.0;
  double b0 = 0.0;
  double b0_prime = 0.0;
  double eta_at_zero = 0.0;  // a'(0) / (2 sqrt(a(0)))
  double eta_pp_at_zero = 0.0;  // from the linearized equation at x = 0
};

EtaZero make_eta_zero(const ModelParams& params, ProfileOptions options = {});

double eta0(double x, const EtaZero& e);
double eta0_prime(double x, const EtaZero& e);
/// Both values from a point carrying H (with_h = true).
double eta0_at(const ProfilePoint& pt, const EtaZero& e);
double eta0_prime_at(const ProfilePoint& pt, const EtaZero& e);

/// Closed form, q = 2p - 1 only.
double eta0_closed_form(double x, const ModelParams& params);

/// (phi_omega(x) - phi_0(x)) / omega.
double eta_fd(double x, double omega, const ModelParams& params);

/// sup |-eta'' + p phi^{p-1} eta - q phi^{q-1} eta + phi| over the grid, eta''
/// from 5-point central differences with step h.
double residual_linearized(std::span<const double> x_grid, const EtaZero& e,
                           double h = 1e-3);
double residual_linearized(std::span<const double> x_grid,
                           const ModelParams& params,
                           const std::function<double(double)>& phi,
                           const std::function<double(double)>& eta,
                           double h = 1e-3);

struct EtaDecayFit {
  double exponent = 0.0;
  int sign = -1;
  double value_at_end = 0.0;  // eta0(4X)
  bool rejected = false;
  std::optional<double> last_sign_change;
};

/// Log-log slope of |eta0| on [X, 4X] and the sign at 4X.
EtaDecayFit decay_exponent_eta(const EtaZero& e, double X);

}  // namespace dpnls
