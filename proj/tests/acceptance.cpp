// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dpnls/eta.hpp"
#include "dpnls/evolve.hpp"
#include "dpnls/mass.hpp"
#include "dpnls/model.hpp"
#include "dpnls/profile.hpp"
#include "dpnls/unstable.hpp"

using namespace dpnls;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

using Criterion = std::function<void(Verdict&)>;

// -- 1 ----------------------------------------------------------------------
void closed_form_profile(Verdict& v) {
  const ModelParams pq{2.0, 3.0};
  for (double w : {0.0, 0.01, 0.1}) {
    const ProfileEvaluator ev(pq, w);
    double err = 0.0;
    for (int i = 0; i <= 2000; ++i) {
      const double x = 0.01 * i;
      err = std::max(err, std::abs(ev.phi(x) - phi_closed_form(x, w, pq)));
    }
    v.detail << "omega=" << w << " sup=" << err << "; ";
    v.require(err < 1e-8, "sup error < 1e-8");
  }
}

// -- 2 ----------------------------------------------------------------------
void closed_form_eta(Verdict& v) {
  for (double p : {1.5, 2.0, 3.0}) {
    const ModelParams pq{p, 2.0 * p - 1.0};
    const EtaZero e = make_eta_zero(pq);
    double err = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double x = 0.05 * i;
      const double ref = eta0_closed_form(x, pq);
      err = std::max(err, std::abs(eta0(x, e) - ref) / std::abs(ref));
    }
    v.detail << "p=" << p << " rel=" << err << "; ";
    v.require(err < 1e-6, "relative error < 1e-6");
  }
  const EtaZero e = make_eta_zero({2.0, 3.0});
  const double at0 = eta0(0.0, e);
  const double at1 = eta0(1.0, e);
  v.detail.precision(10);
  v.detail << "eta0(0)=" << at0 << " eta0(1)=" << at1;
  v.require(std::abs(at0 - 1.5) < 1e-6, "eta0(0) = 3/2");
  v.require(std::abs(at1 - 0.541322) < 1e-6, "eta0(1) = 0.541322");
}

// -- 3 ----------------------------------------------------------------------
void linearized_residual(Verdict& v) {
  std::vector<double> xs;
  for (int i = 0; i <= 990; ++i) xs.push_back(0.1 + 0.01 * i);
  for (const ModelParams pq : {ModelParams{2.0, 3.0}, ModelParams{2.2, 3.4}, ModelParams{2.0, 3.5}}) {
    const double r = residual_linearized(xs, make_eta_zero(pq), 1e-3);
    v.detail << "(" << pq.p << "," << pq.q << ") " << r << "; ";
    v.require(r < 1e-4, "sup residual < 1e-4");
  }
}

// -- 4 ----------------------------------------------------------------------
void decay_exponents(Verdict& v) {
  for (const ModelParams pq : {ModelParams{1.5, 2.0}, ModelParams{2.2, 3.0}, ModelParams{3.0, 4.0}}) {
    const EtaZero e = make_eta_zero(pq);
    const double phi_expected = -2.0 / (pq.p - 1.0);
    const double sphi = decay_exponent_phi(e.profile0, 100.0);
    const EtaDecayFit fit = decay_exponent_eta(e, 100.0);
    v.detail << "p=" << pq.p << " phi " << sphi << " (" << phi_expected << "), |eta| "
             << fit.exponent << " (" << phi_expected + 2.0 << "), eta(400) sign "
             << fit.sign << "; ";
    v.require(std::abs(sphi - phi_expected) <= 0.05, "phi slope within 0.05");
    v.require(std::abs(fit.exponent - (phi_expected + 2.0)) <= 0.05, "eta slope within 0.05");
    v.require(fit.sign < 0 && !fit.rejected, "eta eventually negative");
  }
}

// -- 5 ----------------------------------------------------------------------
void mass_boundary(Verdict& v) {
  const MassDerivative m23 = mass_prime(0.0, {2.0, 3.0});
  v.detail << "M'(0;2,3)=" << m23.value << "; ";
  v.require(!m23.minus_infinity && std::abs(m23.value) < 1e-5, "|M'(0)| < 1e-5 at (2,3)");
  int cells = 0;
  int agree = 0;
  int markers = 0;
  for (double p : {1.25, 1.75, 2.25, 2.75, 3.25}) {
    for (int j = 1; j <= 5; ++j) {
      const double q = p + (5.0 - p) * j / 6.0;
      const ModelParams pq{p, q};
      const StabilityClass cls = classify(pq);
      const MassDerivative m = mass_prime(0.0, pq);
      bool ok = false;
      switch (cls.tag) {
        case StabilityTag::MassDerivPositive: ok = !m.minus_infinity && m.value > 0; break;
        case StabilityTag::MassDerivZero: ok = !m.minus_infinity && std::abs(m.value) < 1e-5; break;
        case StabilityTag::MassDerivNegativeFinite: ok = !m.minus_infinity && m.value < 0; break;
        case StabilityTag::MassDerivMinusInfinity: ok = m.minus_infinity; break;
      }
      const bool marker_ok = m.minus_infinity == (3.0 * p >= 7.0);
      ++cells;
      agree += ok ? 1 : 0;
      markers += m.minus_infinity ? 1 : 0;
      if (!ok || !marker_ok) {
        v.detail << "mismatch at (" << p << "," << q << ") ";
        v.require(false, "sign/marker agrees with classify");
      }
    }
  }
  v.detail << cells << " cells, " << agree << " agree, " << markers << " -inf markers (10 expected)";
  v.require(markers == 10, "-inf exactly on the p >= 7/3 rows");
}

// -- 6 ----------------------------------------------------------------------
void pairing_identity(Verdict& v) {
  const ModelParams pq{2.0, 3.5};
  const double m0 = mass_prime(0.0, pq).value;
  const double pr = pairing_integral(pq).value;
  const double gap = std::abs(m0 - pr) / std::abs(m0);
  v.detail.precision(10);
  v.detail << "M'(0)=" << m0 << " pairing=" << pr << " rel=" << gap << "; ";
  v.require(gap < 1e-5, "relative gap < 1e-5");
  double last = INFINITY;
  for (double w : {1e-1, 1e-2, 1e-3}) {
    const double m = mass_prime(w, pq).value;
    const double d = std::abs(m - pr);
    v.detail << "M'(" << w << ")=" << m << " ";
    v.require(d < last, "distance to the pairing value decreases");
    last = d;
  }
}

// -- 7 ----------------------------------------------------------------------
double relative_gap(const UnstableDirectionReport& r, double limit) {
  return std::abs(r.total - limit) / std::abs(limit);
}

void theorem_limits(Verdict& v) {
  {
    const ModelParams pq{2.0, 3.5};
    const EtaZero e = make_eta_zero(pq);
    const Phi0Norms n = phi0_norms(e);
    const double ell = characteristic_length(pq);
    const double limit = n.quadform + n.l2_sq * n.l2_sq / n.mass_prime0.value;
    v.detail << "(2,3.5) limit=" << limit << " gaps:";
    double g = 0.0;
    for (double R : default_r_schedule(pq)) {
      g = relative_gap(quadform_terms(R, e, n), limit);
      v.detail << " " << R / ell << "l:" << g;
    }
    v.detail << "; ";
    v.require(g < 0.02, "(2,3.5) total(800l) within 2%");
  }
  {
    const ModelParams pq{2.5, 3.2};
    const EtaZero e = make_eta_zero(pq);
    const Phi0Norms n = phi0_norms(e);
    const double ell = characteristic_length(pq);
    const double limit = n.quadform;
    double R = 50.0 * ell;
    double g = INFINITY;
    double g800 = 0.0;
    int k = 0;
    for (; k <= 24 && !(g < 0.02); ++k, R *= 2.0) {
      g = relative_gap(quadform_terms(R, e, n), limit);
      if (k == 4) g800 = g;
    }
    v.detail << "(2.5,3.2) limit=" << limit << " gap(800l)=" << g800 << ", below 2% at R="
             << R / 2.0 / ell << "l (gap " << g << "); ";
    v.require(g < 0.02, "(2.5,3.2) total(R) within 2% of <L0 phi0, phi0>");
  }
  for (const ModelParams pq : {ModelParams{2.0, 3.5}, ModelParams{2.5, 3.2}}) {
    const EtaZero e = make_eta_zero(pq);
    const Phi0Norms n = phi0_norms(e);
    const double ell = characteristic_length(pq);
    auto B = [&](double R) {
      const auto r = quadform_terms(R, e, n);
      return std::abs(r.b_chi_pp) + std::abs(r.b_chi_p);
    };
    auto C = [&](double R) {
      const auto r = quadform_terms(R, e, n);
      return std::abs(r.c_chi_pp) + std::abs(r.c_chi_p);
    };
    const double sb = loglog_slope(B, 50 * ell, 800 * ell, 5);
    const double sc = loglog_slope(C, 50 * ell, 800 * ell, 5);
    const double eb = -4.0 / (pq.p - 1.0) + 1.0;
    const double ec = -4.0 / (pq.p - 1.0) + 3.0;
    v.detail << "p=" << pq.p << " slopes B " << sb << " (" << eb << ") C " << sc << " ("
             << ec << "); ";
    v.require(std::abs(sb - eb) <= 0.3 && std::abs(sc - ec) <= 0.3, "boundary slopes within 0.3");
  }
}

// -- 8 ----------------------------------------------------------------------
void unstable_existence(Verdict& v) {
  for (const ModelParams pq : {ModelParams{2.0, 3.5}, ModelParams{2.2, 3.0}, ModelParams{2.5, 3.2}}) {
    const UnstableSearch s = find_unstable_direction(pq);
    v.detail << "(" << pq.p << "," << pq.q << ") R*=" << s.R_star << " total=" << s.report.total
             << " defect=" << s.report.orthogonality_defect << "; ";
    v.require(s.report.total < 0.0, "total < 0");
    v.require(s.report.orthogonality_defect < 1e-8, "orthogonality defect < 1e-8");
  }
}

// -- 9 ----------------------------------------------------------------------
void conservation(Verdict& v) {
  const ModelParams pq{2.2, 3.0};
  const double ell = characteristic_length(pq);
  for (double lambda : {0.0, 0.01}) {
    FieldState s = init_state(pq, lambda, 10.0 * ell);
    const GridProfile ref = sample_profile(pq, 0.0, s);
    const double rate = stationary_defect_rate(s, 0.0);
    run(s, 10.0, 1000, ref);
    double dq = 0.0;
    double de = 0.0;
    const EvolveSample& a = s.history.front();
    for (const EvolveSample& x : s.history) {
      dq = std::max(dq, std::abs(x.charge - a.charge) / a.charge);
      de = std::max(de, std::abs(x.energy - a.energy) / std::abs(a.energy));
    }
    v.detail << "lambda=" << lambda << " charge " << dq << " energy " << de;
    v.require(dq < 1e-10, "charge drift < 1e-10");
    v.require(de < 1e-6, "energy drift < 1e-6");
    if (lambda == 0.0) {
      const double floor = 2.0 * rate * 10.0;
      const double d = s.history.back().modulation_distance;
      v.detail << " distance(10)=" << d << " floor=" << floor;
      v.require(d <= floor, "distance below the discretization floor");
      v.require(d < 1e-3, "distance < 1e-3");
    }
    v.detail << "; ";
  }
}

// -- 10 ---------------------------------------------------------------------
void instability_demo(Verdict& v) {
  ExperimentOptions opt;
  opt.grid.n = 1u << 13;
  opt.sample_every = 100;
  opt.stop_on_exit = true;
  const InstabilityReport r = instability_experiment({2.2, 3.0}, 0.01, 50.0, opt);
  v.detail << "(2.2,3) R*=" << r.R_star;
  for (const ExitReport* e : {&r.plus, &r.minus}) {
    v.detail << " lambda=" << e->lambda << ": peak/initial="
             << e->peak_distance / e->initial_distance;
    if (e->t_exit) v.detail << " exit t=" << *e->t_exit;
  }
  v.detail << "; ";
  v.require(r.plus.exited && r.minus.exited, "both signs exceed 10x before t=50");

  ExperimentOptions c;
  c.grid.L = 100.0;
  c.grid.n = 1u << 11;
  c.sample_every = 100;
  c.stop_on_exit = false;
  const InstabilityReport s = standing_wave_experiment({1.5, 2.5}, 1.0, 0.01, 50.0, c);
  double worst = 0.0;
  for (const ExitReport* e : {&s.plus, &s.minus}) {
    worst = std::max(worst, e->peak_distance / e->initial_distance);
  }
  v.detail << "(1.5,2.5) omega=1 peak/initial=" << worst;
  v.require(worst < 2.0, "contrast run stays below 2x");
}

// -- 11 ---------------------------------------------------------------------
void quadform_oracle(Verdict& v) {
  const ModelParams pq{2.2, 3.0};
  const EtaZero e = make_eta_zero(pq);
  const double R = 20.0 * characteristic_length(pq);
  const UnstableDirectionReport rep = quadform_terms(R, e);
  const double direct = quadform_direct(rep, e);
  const double gap = std::abs(rep.total - direct) / std::abs(direct);
  v.detail.precision(12);
  v.detail << "(2.2,3.0) R=" << R << " assembled=" << rep.total << " direct=" << direct
           << " rel=" << gap;
  v.require(gap < 1e-4, "relative gap < 1e-4");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, Criterion>> criteria = {
      {"closed-form profile agreement", closed_form_profile},
      {"eta_0 closed-form agreement", closed_form_eta},
      {"linearized equation residual", linearized_residual},
      {"asymptotic exponents", decay_exponents},
      {"mass-derivative boundary", mass_boundary},
      {"pairing identity", pairing_identity},
      {"quadratic-form limits", theorem_limits},
      {"unstable-direction existence", unstable_existence},
      {"conservation and stationarity", conservation},
      {"instability demonstration", instability_demo},
      {"quadratic-form oracle", quadform_oracle},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    Verdict v;
    v.detail.precision(6);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(v);
    } catch (const std::exception& ex) {
      v.pass = false;
      v.detail << "[exception: " << ex.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failures;
    std::printf("%s %2d %s (%.1fs): %s\n", v.pass ? "PASS" : "FAIL", index, name.c_str(), secs,
                v.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
