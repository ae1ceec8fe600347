#include "dpnls/unstable.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace dpnls {

namespace {

double bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
double bump_prime(double t) {
  if (!(t > 0.0)) return 0.0;
  return std::exp(-1.0 / t) / (t * t);
}
double bump_double_prime(double t) {
  if (!(t > 0.0)) return 0.0;
  const double t2 = t * t;
  return std::exp(-1.0 / t) * (1.0 - 2.0 * t) / (t2 * t2);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

CutoffProfile::CutoffProfile(double R) : R_(R) {
  if (!(R > 0.0) || !std::isfinite(R)) {
    std::ostringstream msg;
    msg << "cutoff radius must be positive and finite, got " << R;
    throw PreconditionError(msg.str());
  }
}

double CutoffProfile::unit(double y) {
  y = std::abs(y);
  if (y <= 1.0) return 1.0;
  if (y >= 2.0) return 0.0;
  const double A = bump(2.0 - y);
  const double B = bump(y - 1.0);
  return A / (A + B);
}

double CutoffProfile::unit_prime(double y) {
  const double ay = std::abs(y);
  if (ay <= 1.0 || ay >= 2.0) return 0.0;
  const double A = bump(2.0 - ay);
  const double B = bump(ay - 1.0);
  const double dA = -bump_prime(2.0 - ay);
  const double dB = bump_prime(ay - 1.0);
  const double S = A + B;
  const double v = (dA * B - A * dB) / (S * S);
  return y < 0.0 ? -v : v;
}

double CutoffProfile::unit_double_prime(double y) {
  const double ay = std::abs(y);
  if (ay <= 1.0 || ay >= 2.0) return 0.0;
  const double A = bump(2.0 - ay);
  const double B = bump(ay - 1.0);
  const double dA = -bump_prime(2.0 - ay);
  const double dB = bump_prime(ay - 1.0);
  const double ddA = bump_double_prime(2.0 - ay);
  const double ddB = bump_double_prime(ay - 1.0);
  const double S = A + B;
  const double dS = dA + dB;
  const double num = dA * B - A * dB;
  const double dnum = ddA * B - A * ddB;
  return (dnum * S - 2.0 * num * dS) / (S * S * S);
}

double CutoffProfile::chi(double x) const { return unit(x / R_); }
double CutoffProfile::chi_prime(double x) const { return unit_prime(x / R_) / R_; }
double CutoffProfile::chi_double_prime(double x) const {
  return unit_double_prime(x / R_) / (R_ * R_);
}

CutoffProfile make_cutoff(double R) { return CutoffProfile(R); }

// ---------------------------------------------------------------------------

Phi0Norms phi0_norms(const EtaZero& e) {
  if (!(e.params.p < 5.0)) {
    throw PreconditionError("phi0_norms: requires p < 5");
  }
  const ProfileEvaluator& ev = e.profile0;
  const double p = e.params.p;
  const double q = e.params.q;
  const double a = ev.a();
  auto line = [&](const ProfileEvaluator::PointFunction& fn) {
    return 2.0 * ev.integrate_x(0.0, kInf, fn).value;
  };
  Phi0Norms n;
  n.l2_sq = line([&](const ProfilePoint& pt) { return a * pt.coord.tau; });
  n.grad_sq = line([&](const ProfilePoint& pt) {
    // phi'^2 = W(phi^2) = a tau D
    return a * pt.coord.tau * pt.d;
  });
  n.lp1 = line([&](const ProfilePoint& pt) {
    return std::pow(a * pt.coord.tau, 0.5 * (p + 1.0));
  });
  n.lq1 = line([&](const ProfilePoint& pt) {
    return std::pow(a * pt.coord.tau, 0.5 * (q + 1.0));
  });
  n.quadform = -(p - 1.0) * n.grad_sq - (q - p) * n.lq1;
  n.quadform_direct = n.grad_sq + p * n.lp1 - q * n.lq1;
  n.mass_prime0 = mass_prime(0.0, e.params, ev.options());
  return n;
}

double quadform_phi0(const ModelParams& params) {
  require_subcritical(params);
  return phi0_norms(make_eta_zero(params)).quadform;
}

namespace {

struct BandIntegrals {
  double pairing = 0.0;
  double b_chi_pp = 0.0;
  double b_chi_p = 0.0;
  double c_chi_pp = 0.0;
  double c_chi_p = 0.0;
  double bulk_cross = 0.0;
  double bulk_square = 0.0;
};

BandIntegrals band_integrals(double R, const EtaZero& e) {
  const ProfileEvaluator& ev = e.profile0;
  const CutoffProfile cut(R);
  const double tol = ev.options().quad_tol;
  auto over = [&](double x0, double x1, const ProfileEvaluator::PointFunction& fn) {
    return 2.0 * ev.integrate_x(x0, x1, fn, true, {}, tol).value;
  };
  BandIntegrals out;
  // plateau [0, R]: chi = 1, chi' = chi'' = 0
  const double inner_pair = over(0.0, R, [&](const ProfilePoint& pt) {
    return ev.phi(pt) * eta0_at(pt, e);
  });
  const double inner_phi2 = over(0.0, R, [&](const ProfilePoint& pt) {
    const double f = ev.phi(pt);
    return f * f;
  });
  // transition band [R, 2R]
  out.pairing = inner_pair + over(R, 2 * R, [&](const ProfilePoint& pt) {
    return cut.chi(pt.x) * ev.phi(pt) * eta0_at(pt, e);
  });
  out.bulk_cross = inner_phi2 + over(R, 2 * R, [&](const ProfilePoint& pt) {
    const double f = ev.phi(pt);
    return cut.chi(pt.x) * f * f;
  });
  out.bulk_square = inner_pair + over(R, 2 * R, [&](const ProfilePoint& pt) {
    const double c = cut.chi(pt.x);
    return c * c * ev.phi(pt) * eta0_at(pt, e);
  });
  // the eta0' terms are integrated by parts (chi' vanishes at R and 2R):
  // pointwise eta0' cancels like eta0 - lim eta0 far out
  auto band = [&](const ProfileEvaluator::PointFunction& fn) {
    return 2.0 * ev.integrate_x(R, 2 * R, fn, true, {}, tol).value;
  };
  out.b_chi_pp = band([&](const ProfilePoint& pt) {
    return cut.chi_double_prime(pt.x) * eta0_at(pt, e) * ev.phi(pt);
  });
  // <chi' eta', phi> = -<chi'' phi + chi' phi', eta>
  out.b_chi_p = band([&](const ProfilePoint& pt) {
    return -(cut.chi_double_prime(pt.x) * ev.phi(pt) +
             cut.chi_prime(pt.x) * ev.phi_prime(pt)) *
           eta0_at(pt, e);
  });
  out.c_chi_pp = band([&](const ProfilePoint& pt) {
    const double eta = eta0_at(pt, e);
    return cut.chi_double_prime(pt.x) * cut.chi(pt.x) * eta * eta;
  });
  // <chi' eta', chi eta> = -1/2 <chi'^2 + chi chi'', eta^2>
  out.c_chi_p = band([&](const ProfilePoint& pt) {
    const double eta = eta0_at(pt, e);
    const double c1 = cut.chi_prime(pt.x);
    return -0.5 * (c1 * c1 + cut.chi(pt.x) * cut.chi_double_prime(pt.x)) * eta *
           eta;
  });
  return out;
}

double beta_from(double pairing, double l2_sq, double R) {
  if (!(std::abs(pairing) > 1e-8 * l2_sq)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "beta_R: (phi_0, chi_R eta_0) = " << pairing << " at R=" << R
        << " is too close to zero";
    throw IllConditionedBeta(msg.str(), pairing);
  }
  return -l2_sq / pairing;
}

}  // namespace

double beta_R(double R, const EtaZero& e, const Phi0Norms& norms) {
  const ProfileEvaluator& ev = e.profile0;
  const CutoffProfile cut(R);
  const auto r = ev.integrate_x(
      0.0, 2 * R,
      [&](const ProfilePoint& pt) {
        return cut.chi(pt.x) * ev.phi(pt) * eta0_at(pt, e);
      },
      true, std::array<double, 1>{R});
  return beta_from(2.0 * r.value, norms.l2_sq, R);
}

double beta_R(double R, const EtaZero& e) {
  return beta_R(R, e, phi0_norms(e));
}

UnstableDirectionReport quadform_terms(double R, const EtaZero& e,
                                       const Phi0Norms& norms) {
  UnstableDirectionReport rep;
  rep.R = R;
  rep.l2_sq_phi0 = norms.l2_sq;
  const BandIntegrals bi = band_integrals(R, e);
  rep.pairing_R = bi.pairing;
  rep.b_chi_pp = bi.b_chi_pp;
  rep.b_chi_p = bi.b_chi_p;
  rep.c_chi_pp = bi.c_chi_pp;
  rep.c_chi_p = bi.c_chi_p;
  rep.bulk_cross = bi.bulk_cross;
  rep.bulk_square = bi.bulk_square;
  rep.beta_R = beta_from(bi.pairing, norms.l2_sq, R);

  const double beta = rep.beta_R;
  rep.term_phi0 = norms.quadform;
  // L_0(chi eta) = -chi'' eta - 2 chi' eta' - chi phi
  rep.cross_term = 2.0 * beta * (-bi.b_chi_pp - 2.0 * bi.b_chi_p - bi.bulk_cross);
  rep.square_term =
      beta * beta * (-bi.c_chi_pp - 2.0 * bi.c_chi_p - bi.bulk_square);
  rep.total = rep.term_phi0 + rep.cross_term + rep.square_term;

  if (norms.mass_prime0.minus_infinity) {
    rep.predicted_limit = norms.quadform;
  } else {
    rep.predicted_limit =
        norms.quadform + norms.l2_sq * norms.l2_sq / norms.mass_prime0.value;
  }

  // (psi_R, phi_0) as a single integral of its own
  const ProfileEvaluator& ev = e.profile0;
  const CutoffProfile cut(R);
  const auto inner = ev.integrate_x(
      0.0, 2 * R,
      [&](const ProfilePoint& pt) {
        const double f = ev.phi(pt);
        return f * (f + beta * cut.chi(pt.x) * eta0_at(pt, e));
      },
      true, std::array<double, 1>{R});
  const double a = ev.a();
  const auto outer = ev.integrate_x(
      2 * R, kInf, [&](const ProfilePoint& pt) { return a * pt.coord.tau; });
  rep.orthogonality_defect = std::abs(2.0 * (inner.value + outer.value));
  return rep;
}

UnstableDirectionReport quadform_terms(double R, const EtaZero& e) {
  return quadform_terms(R, e, phi0_norms(e));
}

double quadform_direct(const UnstableDirectionReport& rep, const EtaZero& e,
                       double h) {
  const ProfileEvaluator& ev = e.profile0;
  const CutoffProfile cut(rep.R);
  const double p = e.params.p;
  const double q = e.params.q;
  const double beta = rep.beta_R;
  auto psi = [&](double x) {
    const double c = cut.chi(x);
    const double f = ev.phi(x);
    return c == 0.0 ? f : f + beta * c * eta0(x, e);
  };
  auto integrand = [&](double x) {
    const double v = psi(x);
    const double d2 = (-psi(x + 2 * h) + 16.0 * psi(x + h) - 30.0 * v +
                       16.0 * psi(x - h) - psi(x - 2 * h)) /
                      (12.0 * h * h);
    const double f = ev.phi(x);
    return (-d2 + (p * std::pow(f, p - 1.0) - q * std::pow(f, q - 1.0)) * v) * v;
  };
  quad::Options opt;
  // second differences carry ~1e-10 relative noise
  opt.rel_tol = 1e-7;
  opt.abs_tol = 1e-300;
  opt.l1_relative = true;
  opt.max_intervals = 20000;
  const double R = rep.R;
  const std::array<double, 4> pts{0.0, R, 2 * R, 4 * R};
  double total = quad::integrate(integrand, std::span<const double>(pts), opt).value;
  // beyond 4R psi = phi_0 and (L_0 phi_0) phi_0 = (p-1) phi^{p+1} - (q-1) phi^{q+1}
  const double a = ev.a();
  total += ev.integrate_x(4 * R, kInf, [&](const ProfilePoint& pt) {
                 const double s = a * pt.coord.tau;
                 return (p - 1.0) * std::pow(s, 0.5 * (p + 1.0)) -
                        (q - 1.0) * std::pow(s, 0.5 * (q + 1.0));
               }).value;
  return 2.0 * total;
}

std::vector<double> default_r_schedule(const ModelParams& params) {
  const double ell = characteristic_length(params);
  return {50.0 * ell, 100.0 * ell, 200.0 * ell, 400.0 * ell, 800.0 * ell};
}

UnstableSearch find_unstable_direction(const ModelParams& params,
                                       std::span<const double> R_schedule) {
  const ModelParams pq = make_params(params.p, params.q);
  require_subcritical(pq);
  const StabilityClass cls = classify(pq);
  if (!mass_derivative_negative(cls)) {
    std::ostringstream msg;
    msg << "find_unstable_direction: M'(0) is not negative for p=" << pq.p
        << ", q=" << pq.q << " (class " << to_string(cls.tag)
        << ", 2p+q=" << cls.two_p_plus_q << ")";
    throw NotApplicable(msg.str());
  }
  if (R_schedule.empty()) {
    throw PreconditionError("find_unstable_direction: empty R schedule");
  }
  const EtaZero e = make_eta_zero(pq);
  const Phi0Norms norms = phi0_norms(e);
  UnstableSearch out;
  std::ostringstream diag;
  diag.precision(10);
  for (double R : R_schedule) {
    UnstableDirectionReport rep;
    try {
      rep = quadform_terms(R, e, norms);
    } catch (const IllConditionedBeta& err) {
      diag << " R=" << R << ": ill-conditioned beta (" << err.denominator << ");";
      continue;
    }
    out.table.push_back(rep);
    const bool orth = rep.orthogonality_defect < kOrthogonalityTol * norms.l2_sq;
    if (rep.total < 0.0 && orth) {
      out.R_star = R;
      out.report = rep;
      return out;
    }
    diag << " R=" << R << ": total=" << rep.total
         << ", defect=" << rep.orthogonality_defect << ";";
  }
  throw ScheduleExhausted("find_unstable_direction: no R in the schedule gives a "
                          "negative, orthogonal direction:" + diag.str());
}

UnstableSearch find_unstable_direction(const ModelParams& params) {
  const auto sched = default_r_schedule(params);
  return find_unstable_direction(params, sched);
}

}  // namespace dpnls
