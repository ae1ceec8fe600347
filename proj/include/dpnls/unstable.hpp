#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpnls/errors.hpp"
#include "dpnls/eta.hpp"
#include "dpnls/mass.hpp"
#include "dpnls/model.hpp"

namespace dpnls {

/// Smooth even plateau: 1 on |x| <= R, 0 on |x| >= 2R.
class CutoffProfile {
 public:
  explicit CutoffProfile(double R);

  double R() const { return R_; }
  double chi(double x) const;
  double chi_prime(double x) const;
  double chi_double_prime(double x) const;

  // the unit-scale cutoff and its derivatives
  static double unit(double y);
  static double unit_prime(double y);
  static double unit_double_prime(double y);

 private:
  double R_;
};

CutoffProfile make_cutoff(double R);

struct IllConditionedBeta : NumericalError {
  IllConditionedBeta(const std::string& what, double denominator)
      : NumericalError(what), denominator(denominator) {}
  double denominator;
};

struct NotApplicable : PreconditionError {
  using PreconditionError::PreconditionError;
};

struct ScheduleExhausted : NumericalError {
  using NumericalError::NumericalError;
};

/// R-independent norms of phi_0 used by every report.
struct Phi0Norms {
  double l2_sq = 0.0;      // ||phi_0||^2
  double grad_sq = 0.0;    // ||phi_0'||^2
  double lp1 = 0.0;        // ||phi_0||_{p+1}^{p+1}
  double lq1 = 0.0;        // ||phi_0||_{q+1}^{q+1}
  double quadform = 0.0;   // <L_0 phi_0, phi_0>
  double quadform_direct = 0.0;  // ||phi'||^2 + p lp1 - q lq1
  MassDerivative mass_prime0;
};

Phi0Norms phi0_norms(const EtaZero& e);

struct UnstableDirectionReport {
  double R = 0.0;
  double beta_R = 0.0;
  double term_phi0 = 0.0;
  double cross_term = 0.0;
  double square_term = 0.0;
  double total = 0.0;
  double predicted_limit = 0.0;
  double orthogonality_defect = 0.0;

  // pieces of the decomposition (full-line values)
  double pairing_R = 0.0;   // (phi_0, chi_R eta_0)
  double b_chi_pp = 0.0;    // <chi'' eta, phi>
  double b_chi_p = 0.0;     // <chi' eta', phi>
  double c_chi_pp = 0.0;    // <chi'' eta, chi eta>
  double c_chi_p = 0.0;     // <chi' eta', chi eta>
  double bulk_cross = 0.0;  // <chi phi, phi>
  double bulk_square = 0.0; // <chi^2 phi, eta>
  double l2_sq_phi0 = 0.0;
};

double beta_R(double R, const EtaZero& e);
double beta_R(double R, const EtaZero& e, const Phi0Norms& norms);

/// <L_0 phi_0, phi_0> = -(p-1)||phi_0'||^2 - (q-p)||phi_0||_{q+1}^{q+1}.
double quadform_phi0(const ModelParams& params);

UnstableDirectionReport quadform_terms(double R, const EtaZero& e);
UnstableDirectionReport quadform_terms(double R, const EtaZero& e,
                                       const Phi0Norms& norms);

/// <L_0 psi_R, psi_R> by x-space quadrature of (-psi'' + V psi) psi with
/// psi'' from 5-point differences of psi = phi_0 + beta chi_R eta_0.
double quadform_direct(const UnstableDirectionReport& rep, const EtaZero& e,
                       double h = 1e-3);

/// {50, 100, 200, 400, 800} characteristic lengths.
std::vector<double> default_r_schedule(const ModelParams& params);

struct UnstableSearch {
  double R_star = 0.0;
  UnstableDirectionReport report;
  std::vector<UnstableDirectionReport> table;  // every R tried, in order
};

UnstableSearch find_unstable_direction(const ModelParams& params,
                                       std::span<const double> R_schedule);
UnstableSearch find_unstable_direction(const ModelParams& params);

/// Tolerance on |(psi_R, phi_0)| relative to ||phi_0||^2.
inline constexpr double kOrthogonalityTol = 1e-8;

}  // namespace dpnls
