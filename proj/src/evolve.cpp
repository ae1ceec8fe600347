#include "dpnls/evolve.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dpnls/errors.hpp"
#include "dpnls/eta.hpp"
#include "dpnls/profile.hpp"
#include "dpnls/unstable.hpp"

namespace dpnls {

namespace {

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

// wide cutoff that hides the periodic seam
double seam_cutoff(double x, double L) {
  return CutoffProfile::unit(x / (L / 2.5));
}
double seam_cutoff_prime(double x, double L) {
  const double s = L / 2.5;
  return CutoffProfile::unit_prime(x / s) / s;
}

void require_grid(const GridOptions& g) {
  if (!(g.L > 0.0) || !std::isfinite(g.L)) {
    throw PreconditionError("evolve: L must be positive");
  }
  if (g.n < 16 || (g.n & (g.n - 1)) != 0) {
    std::ostringstream msg;
    msg << "evolve: n must be a power of two >= 16, got " << g.n;
    throw PreconditionError(msg.str());
  }
  if (!(g.dt > 0.0) || !std::isfinite(g.dt)) {
    throw PreconditionError("evolve: dt must be positive");
  }
}

GridOptions resolve(const ModelParams& params, GridOptions g) {
  if (g.L == 0.0) g.L = 100.0 * characteristic_length(params);
  require_grid(g);
  return g;
}

}  // namespace

FieldState make_state(const ModelParams& params, GridOptions g) {
  make_params(params.p, params.q);
  require_grid(g);
  FieldState s;
  s.params = params;
  s.L = g.L;
  s.n = g.n;
  s.dt = g.dt;
  s.values.assign(g.n, cplx(0.0, 0.0));
  s.grid = make_grid(g.L, g.n);
  return s;
}

namespace {

// f(|x_j|) on the grid, evaluated once per mirror pair
template <class F>
std::vector<double> sample_even(const FieldState& s, F&& f) {
  std::vector<double> out(s.n);
  for (std::size_t j = 0; j <= s.n / 2; ++j) {
    const double v = f(std::abs(s.x(j)));
    out[j] = v;
    if (j > 0) out[s.n - j] = v;
  }
  return out;
}

void nonlinear_phase(FieldState& s, double tau) {
  const double kp = 0.5 * (s.params.p - 1.0);
  const double kq = 0.5 * (s.params.q - 1.0);
  for (cplx& u : s.values) {
    const double m2 = std::norm(u);
    if (m2 == 0.0) continue;
    const double l = std::log(m2);
    const double g = std::exp(kp * l) - std::exp(kq * l);
    u *= std::polar(1.0, -tau * g);
  }
}

void linear_step(FieldState& s, double tau) {
  s.grid->forward(s.values);
  const auto& k = s.grid->k();
  for (std::size_t j = 0; j < s.n; ++j) {
    s.values[j] *= std::polar(1.0, -tau * k[j] * k[j]);
  }
  s.grid->backward(s.values);
}

double h1_of(const FieldState& s, const std::vector<cplx>& v,
             const std::vector<cplx>& dv) {
  double acc = 0.0;
  for (std::size_t j = 0; j < s.n; ++j) acc += std::norm(v[j]) + std::norm(dv[j]);
  return std::sqrt(acc * s.dx());
}

void record(FieldState& s, const GridProfile& ref) {
  s.history.push_back({s.t, energy(s), charge(s), modulation_distance(s, ref),
                       sup_norm(s)});
}

bool all_finite(const std::vector<cplx>& v) {
  return std::all_of(v.begin(), v.end(), [](const cplx& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

}  // namespace

// ---------------------------------------------------------------------------

SpectralGrid::SpectralGrid(double L, std::size_t n) : L_(L), n_(n), k_(n) {
  const double base = std::numbers::pi / L;
  for (std::size_t j = 0; j < n; ++j) {
    const double m = j < n / 2 ? static_cast<double>(j)
                               : static_cast<double>(j) - static_cast<double>(n);
    k_[j] = base * m;
  }
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  const int ni = static_cast<int>(n);
  // FFTW_ESTIMATE keeps the plan (and the bits) independent of timing
  plan_fwd_ = fftw_plan_dft_1d(ni, buf, buf, FFTW_FORWARD,
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  plan_bwd_ = fftw_plan_dft_1d(ni, buf, buf, FFTW_BACKWARD,
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  if (plan_fwd_ == nullptr || plan_bwd_ == nullptr) {
    throw NumericalError("SpectralGrid: FFTW planning failed");
  }
}

SpectralGrid::~SpectralGrid() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

void SpectralGrid::forward(std::vector<cplx>& v) const {
  fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_), as_fftw(v.data()),
                   as_fftw(v.data()));
}

void SpectralGrid::backward(std::vector<cplx>& v) const {
  fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_), as_fftw(v.data()),
                   as_fftw(v.data()));
  const double inv = 1.0 / static_cast<double>(n_);
  for (cplx& z : v) z *= inv;
}

std::vector<cplx> SpectralGrid::derivative(const std::vector<cplx>& v) const {
  std::vector<cplx> d = v;
  forward(d);
  for (std::size_t j = 0; j < n_; ++j) {
    d[j] *= j == n_ / 2 ? cplx(0.0, 0.0) : cplx(0.0, k_[j]);
  }
  backward(d);
  return d;
}

std::shared_ptr<const SpectralGrid> make_grid(double L, std::size_t n) {
  return std::make_shared<const SpectralGrid>(L, n);
}

// ---------------------------------------------------------------------------

GridProfile sample_profile(const ModelParams& params, double omega,
                           const FieldState& like) {
  const ProfileEvaluator ev(params, omega);
  const double L = like.L;
  GridProfile g;
  g.omega = omega;
  g.phi = sample_even(like, [&](double ax) { return seam_cutoff(ax, L) * ev.phi(ax); });
  // derivative is odd: evaluate on the x >= 0 side and flip
  g.phi_prime.assign(like.n, 0.0);
  for (std::size_t j = 0; j < like.n; ++j) {
    const double x = like.x(j);
    const double ax = std::abs(x);
    if (ax == 0.0 || j == 0) continue;  // x = 0 and the seam point x = -L
    const double v = seam_cutoff_prime(ax, L) * ev.phi(ax) +
                     seam_cutoff(ax, L) * ev.phi_prime(ax);
    g.phi_prime[j] = x > 0.0 ? v : -v;
  }
  return g;
}

FieldState init_state(const ModelParams& params_in, double lambda, double R,
                      GridOptions grid) {
  const ModelParams params = make_params(params_in.p, params_in.q);
  require_subcritical(params);
  grid = resolve(params, grid);
  if (!(R > 0.0)) throw PreconditionError("init_state: R must be > 0");
  if (2.0 * R > grid.L / 2.5 * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "init_state: psi_R is supported on |x| <= 2R = " << 2 * R
        << " but the box only keeps |x| <= L/2.5 = " << grid.L / 2.5
        << "; increase L";
    throw PreconditionError(msg.str());
  }
  const EtaZero e = make_eta_zero(params);
  const ProfileEvaluator& ev = e.profile0;
  const double tail = ev.phi(grid.L / 2.5) / ev.phi(0.0);
  if (!(tail < 1e-2)) {
    std::ostringstream msg;
    msg << "init_state: L too small, phi_0(L/2.5)/phi_0(0) = " << tail
        << " (algebraic tail wraps around the periodic box)";
    throw PreconditionError(msg.str());
  }
  FieldState s = make_state(params, grid);
  const GridProfile base = sample_profile(params, 0.0, s);
  for (std::size_t j = 0; j < s.n; ++j) s.values[j] = base.phi[j];
  if (lambda == 0.0) return s;

  const UnstableDirectionReport rep = quadform_terms(R, e);
  const CutoffProfile cut(R);
  const double L = s.L;
  const std::vector<double> psi_r = sample_even(s, [&](double ax) {
    const double c = cut.chi(ax);
    const double f = ev.phi(ax);
    const double v = c == 0.0 ? f : f + rep.beta_R * c * eta0(ax, e);
    return seam_cutoff(ax, L) * v;
  });
  std::vector<cplx> psi(psi_r.begin(), psi_r.end());
  const double n_phi = h1_norm(s, s.values);
  const double n_psi = h1_norm(s, psi);
  const double lambda_raw = lambda * n_phi / n_psi;
  for (std::size_t j = 0; j < s.n; ++j) s.values[j] += lambda_raw * psi[j];
  return s;
}

FieldState init_standing_wave(const ModelParams& params_in, double omega,
                              double lambda, GridOptions grid) {
  const ModelParams params = make_params(params_in.p, params_in.q);
  if (!(omega > 0.0)) {
    throw PreconditionError("init_standing_wave: omega must be > 0");
  }
  grid = resolve(params, grid);
  FieldState s = make_state(params, grid);
  const GridProfile base = sample_profile(params, omega, s);
  for (std::size_t j = 0; j < s.n; ++j) s.values[j] = base.phi[j];
  if (lambda == 0.0) return s;
  const double h = 1e-4 * omega;
  const ProfileEvaluator up(params, omega + h), dn(params, omega - h);
  const double L = s.L;
  const std::vector<double> dphi = sample_even(s, [&](double ax) {
    return seam_cutoff(ax, L) * (up.phi(ax) - dn.phi(ax)) / (2.0 * h);
  });
  std::vector<cplx> dir(dphi.begin(), dphi.end());
  const double lambda_raw = lambda * h1_norm(s, s.values) / h1_norm(s, dir);
  for (std::size_t j = 0; j < s.n; ++j) s.values[j] += lambda_raw * dir[j];
  return s;
}

// ---------------------------------------------------------------------------

void step(FieldState& s) {
  if (s.nonlinear) nonlinear_phase(s, 0.5 * s.dt);
  linear_step(s, s.dt);
  if (s.nonlinear) nonlinear_phase(s, 0.5 * s.dt);
  s.t += s.dt;
}

void run(FieldState& s, double t_max, std::size_t sample_every,
         const GridProfile& ref, double stop_above) {
  if (sample_every == 0) throw PreconditionError("run: sample_every must be >= 1");
  const double t0 = s.t;
  const double span = t_max - t0;
  if (span < -1e-12 * std::max(1.0, std::abs(t_max))) {
    throw PreconditionError("run: t_max lies before the current time");
  }
  const auto steps = static_cast<std::size_t>(std::llround(std::max(0.0, span) / s.dt));
  if (s.history.empty()) record(s, ref);
  if (steps == 0) return;
  std::vector<cplx> healthy = s.values;
  double t_healthy = s.t;
  // adjacent nonlinear half steps are fused between samples
  if (s.nonlinear) nonlinear_phase(s, 0.5 * s.dt);
  for (std::size_t i = 1; i <= steps; ++i) {
    linear_step(s, s.dt);
    s.t = t0 + static_cast<double>(i) * s.dt;
    const bool sample = (i % sample_every == 0) || i == steps;
    if (!sample) {
      if (s.nonlinear) nonlinear_phase(s, s.dt);
      continue;
    }
    if (s.nonlinear) nonlinear_phase(s, 0.5 * s.dt);
    if (!all_finite(s.values)) {
      s.values = healthy;
      s.t = t_healthy;
      std::ostringstream msg;
      msg << "run: non-finite field detected before t=" << t0 + i * s.dt
          << "; state restored to t=" << t_healthy;
      throw NumericalError(msg.str());
    }
    record(s, ref);
    healthy = s.values;
    t_healthy = s.t;
    if (stop_above > 0.0 && s.history.back().modulation_distance > stop_above) {
      return;
    }
    if (i < steps && s.nonlinear) nonlinear_phase(s, 0.5 * s.dt);
  }
}

// ---------------------------------------------------------------------------

double charge(const FieldState& s) {
  double acc = 0.0;
  for (const cplx& u : s.values) acc += std::norm(u);
  return 0.5 * acc * s.dx();
}

double energy(const FieldState& s) {
  std::vector<cplx> hat = s.values;
  s.grid->forward(hat);
  const auto& k = s.grid->k();
  double kin = 0.0;
  for (std::size_t j = 0; j < s.n; ++j) kin += k[j] * k[j] * std::norm(hat[j]);
  kin *= s.dx() / static_cast<double>(s.n);
  const double p = s.params.p;
  const double q = s.params.q;
  double pot = 0.0;
  for (const cplx& u : s.values) {
    const double m2 = std::norm(u);
    if (m2 == 0.0) continue;
    pot += std::pow(m2, 0.5 * (p + 1.0)) / (p + 1.0) -
           std::pow(m2, 0.5 * (q + 1.0)) / (q + 1.0);
  }
  return 0.5 * kin + pot * s.dx();
}

double sup_norm(const FieldState& s) {
  double m = 0.0;
  for (const cplx& u : s.values) m = std::max(m, std::abs(u));
  return m;
}

double h1_norm(const FieldState& s, const std::vector<cplx>& v) {
  return h1_of(s, v, s.grid->derivative(v));
}

double modulation_distance(const FieldState& s, const GridProfile& ref) {
  if (ref.phi.size() != s.n || ref.phi_prime.size() != s.n) {
    throw PreconditionError("modulation_distance: profile sampled on another grid");
  }
  const std::vector<cplx> du = s.grid->derivative(s.values);
  cplx inner(0.0, 0.0);
  for (std::size_t j = 0; j < s.n; ++j) {
    inner += s.values[j] * ref.phi[j] + du[j] * ref.phi_prime[j];
  }
  const double mag = std::abs(inner);
  const cplx phase = mag > 0.0 ? inner / mag : cplx(1.0, 0.0);
  double acc = 0.0;
  for (std::size_t j = 0; j < s.n; ++j) {
    acc += std::norm(s.values[j] - phase * ref.phi[j]) +
           std::norm(du[j] - phase * ref.phi_prime[j]);
  }
  return std::sqrt(acc * s.dx());
}

double stationary_defect_rate(const FieldState& s, double omega) {
  std::vector<cplx> d2 = s.values;
  s.grid->forward(d2);
  const auto& k = s.grid->k();
  for (std::size_t j = 0; j < s.n; ++j) d2[j] *= -k[j] * k[j];
  s.grid->backward(d2);
  const double kp = 0.5 * (s.params.p - 1.0);
  const double kq = 0.5 * (s.params.q - 1.0);
  std::vector<cplx> r(s.n);
  for (std::size_t j = 0; j < s.n; ++j) {
    const cplx u = s.values[j];
    const double m2 = std::norm(u);
    const double g = m2 == 0.0 ? 0.0 : std::pow(m2, kp) - std::pow(m2, kq);
    r[j] = -d2[j] + (g + omega) * u;
  }
  return h1_norm(s, r);
}

// ---------------------------------------------------------------------------

std::vector<double> evolve_r_schedule(const ModelParams& params, double L) {
  const double ell = characteristic_length(params);
  std::vector<double> out;
  for (double m : {10.0, 20.0, 50.0}) {
    if (2.0 * m * ell <= L / 2.5 * (1.0 + 1e-12)) out.push_back(m * ell);
  }
  if (out.empty()) {
    std::ostringstream msg;
    msg << "evolve_r_schedule: L=" << L << " cannot hold psi_R for R >= "
        << 10.0 * ell << " (need L >= " << 50.0 * ell << ")";
    throw PreconditionError(msg.str());
  }
  return out;
}

namespace {

ExitReport measure(FieldState s, const GridProfile& ref, double lambda,
                   double t_max, const ExperimentOptions& opt) {
  ExitReport rep;
  rep.lambda = lambda;
  rep.initial_distance = modulation_distance(s, ref);
  rep.threshold = opt.threshold_factor * rep.initial_distance;
  run(s, t_max, opt.sample_every, ref, opt.stop_on_exit ? rep.threshold : 0.0);
  for (const EvolveSample& smp : s.history) {
    rep.peak_distance = std::max(rep.peak_distance, smp.modulation_distance);
    if (!rep.exited && smp.modulation_distance > rep.threshold) {
      rep.exited = true;
      rep.t_exit = smp.t;
    }
  }
  rep.history = std::move(s.history);
  return rep;
}

}  // namespace

InstabilityReport instability_experiment(const ModelParams& params_in,
                                         double lambda, double t_max,
                                         ExperimentOptions options) {
  const ModelParams params = make_params(params_in.p, params_in.q);
  const StabilityClass cls = classify(params);
  if (!mass_derivative_negative(cls)) {
    std::ostringstream msg;
    msg << "instability_experiment: M'(0) is not negative for p=" << params.p
        << ", q=" << params.q << " (class " << to_string(cls.tag) << ")";
    throw NotApplicable(msg.str());
  }
  if (!(lambda > 0.0)) {
    throw PreconditionError("instability_experiment: lambda must be > 0 (both signs are run)");
  }
  options.grid = resolve(params, options.grid);
  const auto schedule = evolve_r_schedule(params, options.grid.L);
  const UnstableSearch found = find_unstable_direction(params, schedule);

  InstabilityReport out;
  out.params = params;
  out.R_star = found.R_star;
  FieldState plus = init_state(params, lambda, found.R_star, options.grid);
  const GridProfile ref = sample_profile(params, 0.0, plus);
  out.plus = measure(std::move(plus), ref, lambda, t_max, options);
  FieldState minus = init_state(params, -lambda, found.R_star, options.grid);
  out.minus = measure(std::move(minus), ref, -lambda, t_max, options);
  return out;
}

InstabilityReport standing_wave_experiment(const ModelParams& params_in,
                                           double omega, double lambda,
                                           double t_max,
                                           ExperimentOptions options) {
  const ModelParams params = make_params(params_in.p, params_in.q);
  if (!(lambda > 0.0)) {
    throw PreconditionError("standing_wave_experiment: lambda must be > 0");
  }
  options.grid = resolve(params, options.grid);
  InstabilityReport out;
  out.params = params;
  out.omega = omega;
  FieldState plus = init_standing_wave(params, omega, lambda, options.grid);
  const GridProfile ref = sample_profile(params, omega, plus);
  out.plus = measure(std::move(plus), ref, lambda, t_max, options);
  FieldState minus = init_standing_wave(params, omega, -lambda, options.grid);
  out.minus = measure(std::move(minus), ref, -lambda, t_max, options);
  return out;
}

}  // namespace dpnls
