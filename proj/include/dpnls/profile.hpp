#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dpnls/model.hpp"
#include "dpnls/quadrature.hpp"

namespace dpnls {

// ---------------------------------------------------------------------------
// Coordinates on the tau-interval (0, 1].
//
// The integrals defining F and F_omega are singular like (1 - s)^{-1/2} at
// s = 1 and run off to s -> 0 where phi decays. A single parameter
// sigma in [0, inf) covers both ends without loss of precision:
//   sigma <= 1/sqrt(2):  s = 1 - sigma^2          (removes the s = 1 root)
//   sigma >  1/sqrt(2):  s = exp(-t), t = ln 2 + (sigma - 1/sqrt(2))
// ---------------------------------------------------------------------------

inline constexpr double kSigmaSplit = 0.70710678118654752440;  // 1/sqrt(2)
inline constexpr double kLogTwo = 0.69314718055994530942;
// s = exp(-t) stays a normal double up to t ~ 708
inline constexpr double kTailTMax = 690.0;
inline constexpr double kSigmaMax = kSigmaSplit + (kTailTMax - kLogTwo);

struct TauCoord {
  double sigma = 0.0;
  double tau = 1.0;
  double log_tau = 0.0;
  double one_minus_tau = 0.0;
  double ds_dsigma = 0.0;  // |d tau / d sigma|
  bool near_one = true;    // sigma <= kSigmaSplit
};

TauCoord tau_coord(double sigma);
double sigma_of_tau(double tau);

/// End of the tabulated tail. At omega = 0, J(a) - J(a tau) ~ tau^{(p-1)/2}
/// must stay a normal double, which shortens the range for large p.
double tail_sigma_max(const ModelParams& params, double omega);

/// Closed-form pieces of W, f, K, J at the scaled argument a(omega) * s,
/// written so that no difference of nearly equal numbers is formed.
class ScaledFunctions {
 public:
  ScaledFunctions(const ModelParams& params, double omega, double a);

  /// J(a) - J(a s) = W(a s; omega) / (a s) >= 0.
  double d(const TauCoord& c) const;
  /// f(a) - f(a s) = W_s(a; omega) - W_s(a s; omega) <= 0.
  double n(const TauCoord& c) const;
  /// K(a) - K(a s).
  double k_diff(const TauCoord& c) const;

  double a() const { return a_; }
  double omega() const { return omega_; }
  /// W_s(a(omega); omega) < 0.
  double w_s_at_a() const { return w_s_a_; }

 private:
  ModelParams params_;
  double omega_;
  double a_;
  double kp_;
  double kq_;
  double a_kp_;  // a^{(p-1)/2}
  double a_kq_;  // a^{(q-1)/2}
  double cp_;    // 2/(p+1) a^{kp}
  double cq_;    // 2/(q+1) a^{kq}
  double f_a_;
  double k_a_;
  double w_s_a_;
};

struct ProfileOptions {
  /// Relative tolerance for integrals over x (mass, inner products).
  double quad_tol = 1e-12;
  /// Largest accepted error on tau after inverting F.
  double inv_tol = 1e-12;
};

/// One point of the half-line x >= 0, carrying everything the quadrature
/// representation knows about it.
struct ProfilePoint {
  TauCoord coord;
  double x = 0.0;
  double d = 0.0;      // J(a) - J(a tau)
  double n = 0.0;      // f(a) - f(a tau)
  double F = 0.0;      // F(tau; omega) = b x
  double H = 0.0;      // int_tau^1 of the F_omega integrand (if requested)
  double dx_dsigma = 0.0;
  bool extrapolated = false;  // beyond the tabulated tail range
};

/// phi_omega and its companions through phi^2 = a G(b x), G = F^{-1}.
///
/// F and the F_omega integral are tabulated once per evaluator at fixed
/// sigma panels (cumulative values), so any point costs one short
/// quadrature. The table grows lazily under a mutex and is shared between
/// copies of the evaluator.
class ProfileEvaluator {
 public:
  ProfileEvaluator(const ModelParams& params, double omega,
                   ProfileOptions options = {});

  const ModelParams& params() const { return params_; }
  double omega() const { return omega_; }
  double a() const { return a_; }
  double b() const { return b_; }
  const ProfileOptions& options() const { return options_; }
  const ScaledFunctions& scaled() const { return fns_; }

  // tau-space operations
  double F(double tau) const;
  double F_tau(double tau) const;
  double F_omega(double tau) const;

  // z-space operations
  double G(double z) const;
  double G_z(double z) const;
  double G_omega(double z) const;

  // x-space operations (even extension to x < 0)
  double phi(double x) const;
  double phi_prime(double x) const;

  ProfilePoint point_at_sigma(double sigma, bool with_h = false) const;
  ProfilePoint point_at_x(double x, bool with_h = false) const;
  /// sigma with F(tau(sigma)) = z, by safeguarded Newton inside one panel.
  double sigma_of_z(double z) const;

  // Quantities at a point (x >= 0 side).
  double phi(const ProfilePoint& pt) const;
  double phi_prime(const ProfilePoint& pt) const;
  double G_z(const ProfilePoint& pt) const;
  double F_omega(const ProfilePoint& pt) const;
  double G_omega(const ProfilePoint& pt) const;

  using PointFunction = std::function<double(const ProfilePoint&)>;

  /// int_{x0}^{x1} fn(point(x)) dx over a piece of the half-line, computed
  /// in the sigma coordinate. x1 may be +infinity; the exponentially
  /// decaying sigma-tail beyond the table is added in closed form.
  /// `x_breaks` are extra points (in x) where fn is not smooth.
  quad::Result integrate_x(double x0, double x1, const PointFunction& fn,
                           bool with_h = false,
                           std::span<const double> x_breaks = {},
                           double rel_tol = -1.0) const;

  /// Evaluated where phi < 1e-14 phi(0) can still be represented; used by
  /// callers that want to flag asymptotic-regime points.
  bool is_tail_extrapolated(double x) const;
  double sigma_max() const { return sigma_max_; }

 private:
  struct Table;

  double dF(const TauCoord& c, double d) const;
  double dH(const TauCoord& c, double d, double n) const;
  void ensure_sigma(double sigma) const;
  void ensure_value(double z) const;

  ModelParams params_;
  double omega_;
  double a_;
  double b_;
  double sigma_max_;
  ProfileOptions options_;
  ScaledFunctions fns_;
  std::shared_ptr<Table> table_;
};

/// Closed form of phi_omega valid only when q = 2p - 1.
double phi_closed_form(double x, double omega, const ModelParams& params);

/// Least-squares slope of log|g| against log x on [x_lo, x_hi] using
/// `samples` log-spaced points.
double loglog_slope(const std::function<double(double)>& g, double x_lo,
                    double x_hi, int samples = 41);

/// Fitted decay exponent of phi_0 over [X, 4X]; expected -2/(p-1).
double decay_exponent_phi(const ProfileEvaluator& ev, double X);

}  // namespace dpnls
