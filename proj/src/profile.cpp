#include "dpnls/profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "dpnls/errors.hpp"
#include "dpnls/roots.hpp"

namespace dpnls {

namespace {

constexpr int kNearOnePanels = 16;
constexpr double kTailPanelWidth = 0.5;
constexpr double kPanelRelTol = 1e-15;
constexpr double kEps = std::numeric_limits<double>::epsilon();

}  // namespace

TauCoord tau_coord(double sigma) {
  TauCoord c;
  c.sigma = sigma;
  if (sigma <= kSigmaSplit) {
    const double u2 = sigma * sigma;
    c.near_one = true;
    c.one_minus_tau = u2;
    c.tau = 1.0 - u2;
    c.log_tau = std::log1p(-u2);
    c.ds_dsigma = 2.0 * sigma;
  } else {
    const double t = kLogTwo + (sigma - kSigmaSplit);
    c.near_one = false;
    c.log_tau = -t;
    c.tau = std::exp(-t);
    c.one_minus_tau = -std::expm1(-t);
    c.ds_dsigma = c.tau;
  }
  return c;
}

double sigma_of_tau(double tau) {
  if (!(tau > 0.0) || tau > 1.0) {
    std::ostringstream msg;
    msg << "tau must lie in (0, 1], got " << tau;
    throw PreconditionError(msg.str());
  }
  if (tau >= 0.5) return std::sqrt(1.0 - tau);
  return kSigmaSplit + (-std::log(tau) - kLogTwo);
}

double tail_sigma_max(const ModelParams& params, double omega) {
  double t_max = kTailTMax;
  if (omega == 0.0) t_max = std::min(t_max, 600.0 / (0.5 * (params.p - 1.0)));
  return kSigmaSplit + (t_max - kLogTwo);
}

// ---------------------------------------------------------------------------

ScaledFunctions::ScaledFunctions(const ModelParams& params, double omega,
                                 double a)
    : params_(params), omega_(omega), a_(a) {
  const double p = params.p;
  const double q = params.q;
  kp_ = 0.5 * (p - 1.0);
  kq_ = 0.5 * (q - 1.0);
  a_kp_ = std::pow(a, kp_);
  a_kq_ = std::pow(a, kq_);
  cp_ = 2.0 / (p + 1.0) * a_kp_;
  cq_ = 2.0 / (q + 1.0) * a_kq_;
  f_a_ = a_kp_ - a_kq_;
  k_a_ = -(5.0 - p) / (p + 1.0) * a_kp_ + (5.0 - q) / (q + 1.0) * a_kq_;
  w_s_a_ = omega + f_a_;
}

double ScaledFunctions::d(const TauCoord& c) const {
  if (c.near_one) {
    // c_p (s^kp - 1) - c_q (s^kq - 1): both terms O(1 - s), opposite sign
    return cp_ * std::expm1(kp_ * c.log_tau) - cq_ * std::expm1(kq_ * c.log_tau);
  }
  // J(a) = omega exactly; avoids the c_q - c_p cancellation as s -> 0
  return omega_ + cp_ * std::exp(kp_ * c.log_tau) -
         cq_ * std::exp(kq_ * c.log_tau);
}

double ScaledFunctions::n(const TauCoord& c) const {
  if (c.near_one) {
    return -a_kp_ * std::expm1(kp_ * c.log_tau) +
           a_kq_ * std::expm1(kq_ * c.log_tau);
  }
  return f_a_ - a_kp_ * std::exp(kp_ * c.log_tau) +
         a_kq_ * std::exp(kq_ * c.log_tau);
}

double ScaledFunctions::k_diff(const TauCoord& c) const {
  const double p = params_.p;
  const double q = params_.q;
  const double wp = (5.0 - p) / (p + 1.0) * a_kp_;
  const double wq = (5.0 - q) / (q + 1.0) * a_kq_;
  if (c.near_one) {
    return wp * std::expm1(kp_ * c.log_tau) - wq * std::expm1(kq_ * c.log_tau);
  }
  return k_a_ + wp * std::exp(kp_ * c.log_tau) - wq * std::exp(kq_ * c.log_tau);
}

// ---------------------------------------------------------------------------

struct ProfileEvaluator::Table {
  std::mutex mu;
  std::vector<double> sigma{0.0};
  std::vector<double> F{0.0};
  std::vector<double> H{0.0};
};

ProfileEvaluator::ProfileEvaluator(const ModelParams& params, double omega,
                                   ProfileOptions options)
    : params_(make_params(params.p, params.q)),
      omega_(omega),
      a_(a_omega(omega, params)),
      b_(2.0 / std::sqrt(a_)),
      sigma_max_(tail_sigma_max(params_, omega)),
      options_(options),
      fns_(params, omega, a_),
      table_(std::make_shared<Table>()) {
  if (!(options_.quad_tol > 0.0) || !(options_.inv_tol > 0.0)) {
    throw PreconditionError("profile tolerances must be positive");
  }
}

double ProfileEvaluator::dF(const TauCoord& c, double d) const {
  if (c.near_one) return c.ds_dsigma / (c.tau * std::sqrt(a_ * d));
  return 1.0 / std::sqrt(a_ * d);
}

double ProfileEvaluator::dH(const TauCoord& c, double d, double n) const {
  const double denom = a_ * std::sqrt(a_) * d * std::sqrt(d);
  if (c.near_one) return c.ds_dsigma * n / (c.tau * denom);
  return n / denom;
}

namespace {

// Panel integral of a smooth integrand, near machine precision.
template <class Fn>
double panel_integral(Fn&& fn, double lo, double hi, double scale,
                      const char* what) {
  if (!(hi > lo)) return 0.0;
  quad::Options opt;
  opt.rel_tol = kPanelRelTol;
  opt.abs_tol = 1e-16 * scale;
  opt.max_intervals = 200;
  opt.throw_on_failure = false;
  const auto res = quad::integrate(fn, lo, hi, opt);
  if (!std::isfinite(res.value) ||
      res.error > 1e-12 * std::max(std::abs(res.value), scale)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": panel quadrature failed on sigma in [" << lo << ", "
        << hi << "], value=" << res.value << ", error=" << res.error
        << ", worst subinterval=[" << res.worst_lo << ", " << res.worst_hi
        << "]";
    throw NumericalError(msg.str());
  }
  return res.value;
}

}  // namespace

void ProfileEvaluator::ensure_sigma(double sigma) const {
  std::lock_guard lock(table_->mu);
  auto& tab = *table_;
  const double target = std::min(sigma, sigma_max_);
  while (tab.sigma.back() < target) {
    const double lo = tab.sigma.back();
    double hi;
    if (lo < kSigmaSplit) {
      hi = std::min(kSigmaSplit,
                    lo + kSigmaSplit / static_cast<double>(kNearOnePanels));
      if (kSigmaSplit - hi < 1e-12) hi = kSigmaSplit;
    } else {
      hi = std::min(sigma_max_, lo + kTailPanelWidth);
    }
    auto fdf = [this](double s) {
      const TauCoord c = tau_coord(s);
      return dF(c, fns_.d(c));
    };
    auto fdh = [this](double s) {
      const TauCoord c = tau_coord(s);
      return dH(c, fns_.d(c), fns_.n(c));
    };
    const double f_prev = tab.F.back();
    const double h_prev = tab.H.back();
    const double df = panel_integral(fdf, lo, hi, 1.0 + std::abs(f_prev), "F");
    // H grows like tau^{-3(p-1)/4} at omega = 0 and leaves double range for
    // large p; past that point it is carried as NaN
    double dh = std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(h_prev)) {
      const double est = quad::gk21(fdh, lo, hi).value;
      if (std::isfinite(est) && std::abs(est) < 1e300) {
        dh = panel_integral(fdh, lo, hi, 1.0 + std::abs(h_prev), "F_omega");
      }
    }
    tab.sigma.push_back(hi);
    tab.F.push_back(f_prev + df);
    tab.H.push_back(h_prev + dh);
  }
}

void ProfileEvaluator::ensure_value(double z) const {
  while (true) {
    double last_sigma;
    double last_F;
    {
      std::lock_guard lock(table_->mu);
      last_sigma = table_->sigma.back();
      last_F = table_->F.back();
    }
    if (last_F > z || last_sigma >= sigma_max_) return;
    ensure_sigma(last_sigma + 8.0);
  }
}

ProfilePoint ProfileEvaluator::point_at_sigma(double sigma, bool with_h) const {
  if (!(sigma >= 0.0)) {
    throw PreconditionError("point_at_sigma: sigma must be >= 0");
  }
  ProfilePoint pt;
  pt.coord = tau_coord(sigma);
  if (sigma == 0.0) {
    // tau = 1 exactly: x = 0, D = N = 0
    const TauCoord c = tau_coord(1e-8);
    pt.dx_dsigma = dF(c, fns_.d(c)) / b_;
    return pt;
  }
  pt.d = fns_.d(pt.coord);
  pt.n = fns_.n(pt.coord);

  if (sigma > sigma_max_) {
    ensure_sigma(sigma_max_);
    double f_max;
    {
      std::lock_guard lock(table_->mu);
      f_max = table_->F.back();
    }
    const TauCoord cm = tau_coord(sigma_max_);
    const double df_max = dF(cm, fns_.d(cm));
    const double extra = sigma - sigma_max_;
    if (omega_ > 0.0) {
      pt.F = f_max + df_max * extra;
    } else {
      const double kappa = 0.25 * (params_.p - 1.0);
      pt.F = f_max + df_max * std::expm1(kappa * extra) / kappa;
    }
    pt.x = pt.F / b_;
    pt.H = std::numeric_limits<double>::quiet_NaN();
    pt.dx_dsigma = dF(pt.coord, pt.d) / b_;
    pt.extrapolated = true;
    return pt;
  }

  ensure_sigma(sigma);
  double lo;
  double f_lo;
  double h_lo;
  {
    std::lock_guard lock(table_->mu);
    const auto& s = table_->sigma;
    auto it = std::upper_bound(s.begin(), s.end(), sigma);
    const std::size_t k =
        it == s.begin() ? 0 : static_cast<std::size_t>(it - s.begin()) - 1;
    lo = s[k];
    f_lo = table_->F[k];
    h_lo = table_->H[k];
  }
  auto fdf = [this](double s) {
    const TauCoord c = tau_coord(s);
    return dF(c, fns_.d(c));
  };
  pt.F = f_lo + panel_integral(fdf, lo, sigma, 1.0 + std::abs(f_lo), "F");
  pt.x = pt.F / b_;
  pt.dx_dsigma = dF(pt.coord, pt.d) / b_;
  if (with_h) {
    auto fdh = [this](double s) {
      const TauCoord c = tau_coord(s);
      return dH(c, fns_.d(c), fns_.n(c));
    };
    if (std::isfinite(h_lo)) {
      pt.H = h_lo + panel_integral(fdh, lo, sigma, 1.0 + std::abs(h_lo), "F_omega");
    } else {
      pt.H = std::numeric_limits<double>::quiet_NaN();
    }
  } else {
    pt.H = std::numeric_limits<double>::quiet_NaN();
  }
  return pt;
}

double ProfileEvaluator::sigma_of_z(double z) const {
  if (!(z >= 0.0) || std::isnan(z)) {
    std::ostringstream msg;
    msg << "G: argument must be >= 0, got " << z;
    throw PreconditionError(msg.str());
  }
  if (z == 0.0) return 0.0;
  if (std::isinf(z)) return std::numeric_limits<double>::infinity();
  ensure_value(z);
  std::size_t k;
  double lo;
  double hi;
  double f_lo;
  double f_hi;
  bool beyond = false;
  {
    std::lock_guard lock(table_->mu);
    const auto& F = table_->F;
    if (F.back() <= z) {
      beyond = true;
      k = F.size();
    } else {
      auto it = std::upper_bound(F.begin(), F.end(), z);
      k = static_cast<std::size_t>(it - F.begin()) - 1;
    }
    if (k + 1 < F.size()) {
      lo = table_->sigma[k];
      hi = table_->sigma[k + 1];
      f_lo = F[k];
      f_hi = F[k + 1];
    } else {
      lo = hi = f_lo = f_hi = F.back();
    }
  }
  if (beyond) {
    // beyond the tabulated range: invert the asymptotic growth of F
    double f_max;
    {
      std::lock_guard lock(table_->mu);
      f_max = table_->F.back();
    }
    const TauCoord cm = tau_coord(sigma_max_);
    const double df_max = dF(cm, fns_.d(cm));
    const double excess = z - f_max;
    if (omega_ > 0.0) return sigma_max_ + excess / df_max;
    const double kappa = 0.25 * (params_.p - 1.0);
    return sigma_max_ + std::log1p(kappa * excess / df_max) / kappa;
  }

  auto integrand = [this](double s) {
    const TauCoord c = tau_coord(s);
    return dF(c, fns_.d(c));
  };
  auto fdf = [&](double s) {
    const double val =
        f_lo + panel_integral(integrand, lo, s, 1.0 + std::abs(f_lo), "F") - z;
    return std::pair{val, integrand(s)};
  };
  const double guess = lo + (hi - lo) * (z - f_lo) / (f_hi - f_lo);
  const double xtol = 4.0 * kEps * (1.0 + hi);
  const auto res = roots::bracketed_newton(fdf, lo, hi, guess, xtol, 200);
  // post-check on tau
  const auto [resid, slope] = fdf(res.x);
  const TauCoord c = tau_coord(res.x);
  const double tau_err = std::abs(resid / slope) * c.ds_dsigma;
  if (!(tau_err <= options_.inv_tol)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "G: inversion of F missed tolerance at z=" << z
        << ", estimated tau error=" << tau_err;
    throw NumericalError(msg.str());
  }
  return res.x;
}

ProfilePoint ProfileEvaluator::point_at_x(double x, bool with_h) const {
  const double ax = std::abs(x);
  ProfilePoint pt = point_at_sigma(sigma_of_z(b_ * ax), with_h);
  pt.x = ax;  // the requested abscissa, not F/b re-rounded
  return pt;
}

bool ProfileEvaluator::is_tail_extrapolated(double x) const {
  return sigma_of_z(b_ * std::abs(x)) > sigma_max_;
}

// ---------------------------------------------------------------------------

double ProfileEvaluator::F(double tau) const {
  const double sigma = sigma_of_tau(tau);
  if (sigma == 0.0) return 0.0;
  return point_at_sigma(sigma).F;
}

double ProfileEvaluator::F_tau(double tau) const {
  if (!(tau > 0.0) || !(tau < 1.0)) {
    std::ostringstream msg;
    msg << "F_tau: tau must lie in (0, 1), got " << tau;
    throw PreconditionError(msg.str());
  }
  const TauCoord c = tau_coord(sigma_of_tau(tau));
  return -1.0 / (c.tau * std::sqrt(a_ * fns_.d(c)));
}

double ProfileEvaluator::F_omega(double tau) const {
  const double sigma = sigma_of_tau(tau);
  if (sigma == 0.0) return 0.0;
  return F_omega(point_at_sigma(sigma, true));
}

double ProfileEvaluator::G(double z) const {
  return tau_coord(sigma_of_z(z)).tau;
}

double ProfileEvaluator::G_z(double z) const {
  const double sigma = sigma_of_z(z);
  if (sigma == 0.0) return 0.0;
  return G_z(point_at_sigma(sigma));
}

double ProfileEvaluator::G_omega(double z) const {
  const double sigma = sigma_of_z(z);
  if (sigma == 0.0) return 0.0;
  return G_omega(point_at_sigma(sigma, true));
}

double ProfileEvaluator::phi(double x) const {
  return phi(point_at_sigma(sigma_of_z(b_ * std::abs(x))));
}

double ProfileEvaluator::phi_prime(double x) const {
  if (x == 0.0) return 0.0;
  const double v = phi_prime(point_at_sigma(sigma_of_z(b_ * std::abs(x))));
  return x > 0.0 ? v : -v;
}

double ProfileEvaluator::phi(const ProfilePoint& pt) const {
  return std::sqrt(a_ * pt.coord.tau);
}

double ProfileEvaluator::phi_prime(const ProfilePoint& pt) const {
  // -sqrt(W(phi^2)) with W(a tau) = a tau D
  return -std::sqrt(a_ * pt.coord.tau * pt.d);
}

double ProfileEvaluator::G_z(const ProfilePoint& pt) const {
  return -pt.coord.tau * std::sqrt(a_ * pt.d);
}

double ProfileEvaluator::F_omega(const ProfilePoint& pt) const {
  return -a_ / (2.0 * fns_.w_s_at_a()) * pt.H;
}

double ProfileEvaluator::G_omega(const ProfilePoint& pt) const {
  // -F_omega / F_tau = F_omega * sqrt(G W(a G))
  return F_omega(pt) * pt.coord.tau * std::sqrt(a_ * pt.d);
}

quad::Result ProfileEvaluator::integrate_x(double x0, double x1,
                                           const PointFunction& fn, bool with_h,
                                           std::span<const double> x_breaks,
                                           double rel_tol) const {
  if (!(x0 >= 0.0) || !(x1 >= x0)) {
    std::ostringstream msg;
    msg << "integrate_x: need 0 <= x0 <= x1, got [" << x0 << ", " << x1 << "]";
    throw PreconditionError(msg.str());
  }
  const bool to_infinity = std::isinf(x1);
  const double s0 = sigma_of_z(b_ * x0);
  double s1 = to_infinity ? sigma_max_ : sigma_of_z(b_ * x1);
  bool add_tail = to_infinity;
  if (s1 > sigma_max_) {
    s1 = sigma_max_;
    add_tail = true;
  }
  std::vector<double> pts{s0, s1};
  if (s0 < kSigmaSplit && kSigmaSplit < s1) pts.push_back(kSigmaSplit);
  for (double xb : x_breaks) {
    if (xb > x0 && xb < x1) {
      const double sb = sigma_of_z(b_ * xb);
      if (sb > s0 && sb < s1) pts.push_back(sb);
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  auto integrand = [&](double s) {
    const ProfilePoint pt = point_at_sigma(s, with_h);
    return fn(pt) * pt.dx_dsigma;
  };
  quad::Options opt;
  opt.rel_tol = rel_tol > 0.0 ? rel_tol : options_.quad_tol;
  opt.abs_tol = 1e-300;
  opt.max_intervals = 20000;
  opt.l1_relative = true;
  quad::Result res = quad::integrate(integrand, std::span<const double>(pts), opt);

  if (add_tail) {
    const double f_end = integrand(sigma_max_);
    if (f_end != 0.0) {
      const double f_prev = integrand(sigma_max_ - 1.0);
      const double ratio = f_prev / f_end;
      if (!(ratio > 1.0) || !std::isfinite(ratio)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "integrate_x: integrand does not decay in the far tail, f("
            << sigma_max_ - 1.0 << ")=" << f_prev << ", f(" << sigma_max_
            << ")=" << f_end;
        throw NumericalError(msg.str());
      }
      const double kappa = std::log(ratio);
      res.value += f_end / kappa;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

double phi_closed_form(double x, double omega, const ModelParams& params) {
  const double p = params.p;
  if (std::abs(params.q - (2.0 * p - 1.0)) >= 1e-12) {
    std::ostringstream msg;
    msg << "phi_closed_form requires q = 2p - 1, got p=" << p
        << ", q=" << params.q;
    throw PreconditionError(msg.str());
  }
  if (!(omega >= 0.0)) throw PreconditionError("phi_closed_form: omega < 0");
  const double ax = std::abs(x);
  const double c = (p + 1.0) * (p + 1.0) / p;
  if (omega == 0.0) {
    return std::pow(2.0 * (p + 1.0) / (c + (p - 1.0) * (p - 1.0) * ax * ax),
                    1.0 / (p - 1.0));
  }
  const double y = c * omega;
  const double root = std::sqrt(1.0 + y);
  const double v = (p - 1.0) * std::sqrt(omega) * ax;
  double log_denom;
  if (v < 20.0) {
    // sqrt(1+y) cosh v - 1 = (sqrt(1+y) - 1) cosh v + (cosh v - 1)
    const double sh = std::sinh(0.5 * v);
    log_denom = std::log(y / (root + 1.0) * std::cosh(v) + 2.0 * sh * sh);
  } else {
    log_denom = v + std::log(0.5 * root * (1.0 + std::exp(-2.0 * v)) -
                             std::exp(-v));
  }
  return std::exp((std::log((p + 1.0) * omega) - log_denom) / (p - 1.0));
}

double loglog_slope(const std::function<double(double)>& g, double x_lo,
                    double x_hi, int samples) {
  if (!(x_lo > 0.0) || !(x_hi > x_lo) || samples < 2) {
    throw PreconditionError("loglog_slope: need 0 < x_lo < x_hi, samples >= 2");
  }
  const double l0 = std::log(x_lo);
  const double l1 = std::log(x_hi);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double lx = l0 + (l1 - l0) * i / (samples - 1);
    const double ly = std::log(std::abs(g(std::exp(lx))));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = samples;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double decay_exponent_phi(const ProfileEvaluator& ev, double X) {
  if (ev.omega() != 0.0) {
    throw PreconditionError("decay_exponent_phi requires omega = 0");
  }
  return loglog_slope([&](double x) { return ev.phi(x); }, X, 4.0 * X);
}

}  // namespace dpnls
