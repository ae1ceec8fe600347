#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dpnls/errors.hpp"
#include "dpnls/eta.hpp"
#include "dpnls/evolve.hpp"
#include "dpnls/mass.hpp"
#include "dpnls/model.hpp"
#include "dpnls/profile.hpp"
#include "dpnls/unstable.hpp"

namespace dpnls::cli {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }
bool finite_pos(double v) { return std::isfinite(v) && v > 0.0; }

ProfileOptions profile_options(const Common& c) {
  require(finite_pos(c.quad_tol) && c.quad_tol < 1e-2,
          "--quad-tol must lie in (0, 1e-2)");
  ProfileOptions o;
  o.quad_tol = c.quad_tol;
  return o;
}

bool closed_form_case(const ModelParams& pq) {
  return std::abs(pq.q - (2.0 * pq.p - 1.0)) < 1e-12;
}

std::vector<double> symmetric_grid(double xmax, long n) {
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    xs[i] = -xmax + 2.0 * xmax * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  // exact mirror image, so that evenness is checkable bit for bit
  for (long i = 0; i < n / 2; ++i) xs[n - 1 - i] = -xs[i];
  if (n % 2 == 1) xs[n / 2] = 0.0;
  return xs;
}

Output table_output(const Common& c, Table t) {
  require(c.format == "csv" || c.format == "json", "--format must be csv or json");
  Output o;
  if (c.format == "csv") {
    o.is_table = true;
    o.table = std::move(t);
  } else {
    o.document = std::move(t).as_json();
  }
  return o;
}

void require_json(const Common& c, const char* cmd) {
  require(c.format == "json" || c.format.empty(),
          std::string(cmd) + " only writes JSON (--format json)");
}

json mass_derivative_json(const MassDerivative& m) {
  if (m.minus_infinity) return "-inf";
  return m.value;
}

json report_json(const UnstableDirectionReport& r) {
  return {{"R", r.R},
          {"beta_R", r.beta_R},
          {"term_phi0", r.term_phi0},
          {"cross_term", r.cross_term},
          {"square_term", r.square_term},
          {"total", r.total},
          {"predicted_limit", r.predicted_limit},
          {"orthogonality_defect", r.orthogonality_defect},
          {"pairing_R", r.pairing_R},
          {"b_chi_pp", r.b_chi_pp},
          {"b_chi_p", r.b_chi_p},
          {"c_chi_pp", r.c_chi_pp},
          {"c_chi_p", r.c_chi_p},
          {"bulk_cross", r.bulk_cross},
          {"bulk_square", r.bulk_square}};
}

json samples_json(const std::vector<EvolveSample>& h) {
  json arr = json::array();
  for (const EvolveSample& s : h) {
    arr.push_back({{"t", s.t},
                   {"energy", s.energy},
                   {"charge", s.charge},
                   {"modulation_distance", s.modulation_distance},
                   {"sup_norm", s.sup_norm}});
  }
  return arr;
}

}  // namespace

Output cmd_classify(const Common& c) {
  const ModelParams pq = make_params(c.p, c.q);
  require_json(c, "classify");
  const StabilityClass cls = classify(pq);
  const bool below_seven_thirds = 3.0 * pq.p < 7.0;
  const bool mass_condition = cls.two_p_plus_q > 7.0 + 1e-12;
  const bool on_gamma1 = std::abs(pq.q - cls.gamma1_threshold) <= 1e-12;
  const bool gamma1_condition = pq.q > cls.gamma1_threshold && !on_gamma1;
  json notes = json::array();
  if (!mass_condition) {
    notes.push_back("mass derivative at omega = 0 is not negative");
  } else if (gamma1_condition) {
    notes.push_back("both conditions hold: 2p+q > 7 and q > gamma1(p)");
  } else if (on_gamma1) {
    notes.push_back("gap region boundary: 2p+q > 7 holds, q = gamma1(p)");
  } else {
    notes.push_back("gap region: 2p+q > 7 holds, q < gamma1(p)");
  }
  if (!below_seven_thirds) notes.push_back("p >= 7/3: mass derivative at omega = 0 is -inf");
  Output o;
  o.document = {{"command", "classify"},
                {"p", pq.p},
                {"q", pq.q},
                {"class", std::string(to_string(cls.tag))},
                {"two_p_plus_q", cls.two_p_plus_q},
                {"gamma1", cls.gamma1_threshold},
                {"mass_condition", mass_condition},
                {"gamma1_condition", gamma1_condition},
                {"notes", notes}};
  return o;
}

Output cmd_profile(const Common& c, const ProfileArgs& a) {
  const ModelParams pq = make_params(c.p, c.q);
  const ProfileOptions opts = profile_options(c);
  require(finite_nonneg(a.omega), "--omega must be finite and >= 0");
  require(finite_pos(a.xmax), "--xmax must be finite and > 0");
  require(a.n >= 2 && a.n <= 10000000, "--n must lie in [2, 1e7]");
  const ProfileEvaluator ev(pq, a.omega, opts);
  const bool closed = closed_form_case(pq);
  Table t;
  t.header = {"x", "phi", "phi_prime"};
  if (closed) t.header.push_back("phi_closed_form");
  for (double x : symmetric_grid(a.xmax, a.n)) {
    std::vector<double> row{x, ev.phi(x), ev.phi_prime(x)};
    if (closed) row.push_back(phi_closed_form(x, a.omega, pq));
    t.add(std::move(row));
  }
  return table_output(c, std::move(t));
}

Output cmd_eta(const Common& c, const EtaArgs& a) {
  const ModelParams pq = make_params(c.p, c.q);
  const ProfileOptions opts = profile_options(c);
  require(finite_pos(a.xmax), "--xmax must be finite and > 0");
  require(a.n >= 2 && a.n <= 10000000, "--n must lie in [2, 1e7]");
  const EtaZero e = make_eta_zero(pq, opts);
  const bool closed = closed_form_case(pq);
  Table t;
  t.header = {"x", "eta0", "eta0_prime"};
  if (closed) t.header.push_back("eta0_closed_form");
  for (double x : symmetric_grid(a.xmax, a.n)) {
    const double ax = std::abs(x);
    const double d = eta0_prime(ax, e);
    std::vector<double> row{x, eta0(ax, e), x < 0.0 ? -d : d};
    if (closed) row.push_back(eta0_closed_form(ax, pq));
    t.add(std::move(row));
  }
  return table_output(c, std::move(t));
}

Output cmd_mass_curve(const Common& c, const MassCurveArgs& a) {
  const ModelParams pq = make_params(c.p, c.q);
  const ProfileOptions opts = profile_options(c);
  require(finite_nonneg(a.omega_min), "--omega-min must be finite and >= 0");
  require(std::isfinite(a.omega_max) && a.omega_max >= a.omega_min,
          "--omega-max must be finite and >= --omega-min");
  require(a.n >= 1 && a.n <= 100000, "--n must lie in [1, 1e5]");
  require(a.n > 1 || a.omega_max == a.omega_min,
          "--n 1 needs --omega-min equal to --omega-max");
  require(finite_pos(a.fd_step), "--fd-step must be > 0");
  Table t;
  t.header = {"omega", "mass", "mass_prime", "mass_prime_fd"};
  for (long i = 0; i < a.n; ++i) {
    const double w = a.n == 1 ? a.omega_min
                              : a.omega_min + (a.omega_max - a.omega_min) *
                                                  static_cast<double>(i) /
                                                  static_cast<double>(a.n - 1);
    const MassDerivative mp = mass_prime(w, pq, opts);
    const double h = std::min(a.fd_step, 0.5 * w);
    const double fd = w > 0.0 ? mass_prime_fd(w, h, pq, opts) : std::nan("");
    t.add({w, mass(w, pq, opts), mp.minus_infinity ? -INFINITY : mp.value, fd});
  }
  return table_output(c, std::move(t));
}

Output cmd_unstable(const Common& c, const UnstableArgs& a) {
  const ModelParams pq = make_params(c.p, c.q);
  require_subcritical(pq);
  require_json(c, "unstable");
  const ProfileOptions opts = profile_options(c);
  const double ell = characteristic_length(pq);
  std::vector<double> schedule = a.R;
  for (double m : a.R_ell) schedule.push_back(m * ell);
  for (double R : schedule) require(finite_pos(R), "every R must be finite and > 0");
  const StabilityClass cls = classify(pq);
  if (!mass_derivative_negative(cls)) {
    std::ostringstream msg;
    msg << "no unstable direction construction: class " << to_string(cls.tag)
        << " (2p+q=" << cls.two_p_plus_q << " <= 7)";
    throw NotApplicable(msg.str());
  }
  if (schedule.empty()) schedule = default_r_schedule(pq);
  const EtaZero e = make_eta_zero(pq, opts);
  const Phi0Norms norms = phi0_norms(e);
  json rows = json::array();
  json r_star = nullptr;
  for (double R : schedule) {
    const UnstableDirectionReport rep = quadform_terms(R, e, norms);
    if (r_star.is_null() && rep.total < 0.0 &&
        rep.orthogonality_defect < kOrthogonalityTol) {
      r_star = R;
    }
    rows.push_back(report_json(rep));
  }
  const double limit = norms.mass_prime0.minus_infinity
                           ? norms.quadform
                           : norms.quadform + norms.l2_sq * norms.l2_sq / norms.mass_prime0.value;
  Output o;
  o.document = {{"command", "unstable"},
                {"p", pq.p},
                {"q", pq.q},
                {"class", std::string(to_string(cls.tag))},
                {"characteristic_length", ell},
                {"schedule", schedule},
                {"phi0", {{"l2_sq", norms.l2_sq},
                          {"quadform", norms.quadform},
                          {"mass_prime0", mass_derivative_json(norms.mass_prime0)}}},
                {"predicted_limit", limit},
                {"found", !r_star.is_null()},
                {"R_star", r_star},
                {"rows", rows}};
  o.exit_code = r_star.is_null() ? 4 : 0;
  return o;
}

Output cmd_evolve(const Common& c, const EvolveArgs& a) {
  const ModelParams pq = make_params(c.p, c.q);
  require_subcritical(pq);
  require(std::isfinite(a.lambda) && std::abs(a.lambda) <= 1.0,
          "--lambda must be finite with |lambda| <= 1");
  require(finite_nonneg(a.omega), "--omega must be finite and >= 0");
  require(finite_pos(a.t_max), "--t-max must be finite and > 0");
  require(finite_nonneg(a.R), "--R must be finite and >= 0");
  require(finite_nonneg(a.L), "--L must be finite and >= 0");
  require(a.sample_every >= 1, "--sample-every must be >= 1");
  require(std::isfinite(a.threshold_factor) && a.threshold_factor > 1.0,
          "--threshold-factor must be > 1");
  require(!a.experiment || a.lambda > 0.0,
          "--experiment runs both signs and needs --lambda > 0");
  require(c.format == "csv" || c.format == "json", "--format must be csv or json");
  require(a.n >= 16 && a.n <= (1L << 24), "--n must lie in [16, 2^24]");
  GridOptions g;
  g.L = a.L > 0.0 ? a.L : 100.0 * characteristic_length(pq);
  g.n = static_cast<std::size_t>(a.n);
  g.dt = a.dt;
  make_state(pq, g);  // grid checks before any profile work
  require(a.t_max / a.dt <= 1e9, "--t-max / --dt exceeds 1e9 steps");

  double R = a.R;
  if (a.omega == 0.0 && a.lambda != 0.0 && R == 0.0) {
    R = find_unstable_direction(pq, evolve_r_schedule(pq, g.L)).R_star;
  }
  if (a.omega == 0.0 && R == 0.0) R = g.L / 5.0;  // unused at lambda = 0

  auto initial = [&](double lambda) {
    return a.omega > 0.0 ? init_standing_wave(pq, a.omega, lambda, g)
                         : init_state(pq, lambda, R, g);
  };
  const auto every = static_cast<std::size_t>(a.sample_every);

  json head = {{"command", "evolve"},
               {"p", pq.p},
               {"q", pq.q},
               {"omega", a.omega},
               {"R", a.omega > 0.0 ? json(nullptr) : json(R)},
               {"L", g.L},
               {"n", a.n},
               {"dt", a.dt},
               {"t_max", a.t_max}};

  if (!a.experiment) {
    FieldState s = initial(a.lambda);
    const GridProfile ref = sample_profile(pq, a.omega, s);
    const double rate = stationary_defect_rate(s, a.omega);
    run(s, a.t_max, every, ref);
    Output o;
    if (c.format == "csv") {
      o.is_table = true;
      o.table.header = {"t", "energy", "charge", "modulation_distance", "sup_norm"};
      for (const EvolveSample& x : s.history) {
        o.table.add({x.t, x.energy, x.charge, x.modulation_distance, x.sup_norm});
      }
    } else {
      o.document = head;
      o.document["lambda"] = a.lambda;
      o.document["stationary_defect_rate"] = rate;
      o.document["samples"] = samples_json(s.history);
    }
    return o;
  }

  std::vector<ExitReport> reports;
  for (double lambda : {a.lambda, -a.lambda}) {
    FieldState s = initial(lambda);
    const GridProfile ref = sample_profile(pq, a.omega, s);
    ExitReport rep;
    rep.lambda = lambda;
    rep.initial_distance = modulation_distance(s, ref);
    rep.threshold = a.threshold_factor * rep.initial_distance;
    run(s, a.t_max, every, ref);
    for (const EvolveSample& smp : s.history) {
      rep.peak_distance = std::max(rep.peak_distance, smp.modulation_distance);
      if (!rep.exited && smp.modulation_distance > rep.threshold) {
        rep.exited = true;
        rep.t_exit = smp.t;
      }
    }
    rep.history = std::move(s.history);
    reports.push_back(std::move(rep));
  }
  const bool any_exit = reports[0].exited || reports[1].exited;
  Output o;
  // around phi_0 an exit is the expected outcome; around phi_omega it is not
  o.exit_code = (a.omega == 0.0 && !any_exit) ? 4 : 0;
  if (c.format == "csv") {
    o.is_table = true;
    o.table.header = {"lambda", "t", "energy", "charge", "modulation_distance", "sup_norm"};
    for (const ExitReport& r : reports) {
      for (const EvolveSample& x : r.history) {
        o.table.add({r.lambda, x.t, x.energy, x.charge, x.modulation_distance, x.sup_norm});
      }
    }
    return o;
  }
  o.document = head;
  json runs = json::array();
  for (const ExitReport& r : reports) {
    runs.push_back({{"lambda", r.lambda},
                    {"exited", r.exited},
                    {"t_exit", r.t_exit ? json(*r.t_exit) : json(nullptr)},
                    {"initial_distance", r.initial_distance},
                    {"peak_distance", r.peak_distance},
                    {"threshold", r.threshold},
                    {"samples", samples_json(r.history)}});
  }
  o.document["threshold_factor"] = a.threshold_factor;
  o.document["runs"] = runs;
  return o;
}

// ---------------------------------------------------------------------------

namespace {

struct Suite {
  std::string name;
  std::string status = "pass";
  json measured = json::object();
  std::string note;
};

template <class Fn>
Suite run_suite(const std::string& name, Fn&& fn) {
  Suite s;
  s.name = name;
  try {
    fn(s);
  } catch (const std::exception& ex) {
    s.status = "fail";
    s.note = std::string("exception: ") + ex.what();
  }
  return s;
}

void check(Suite& s, const std::string& key, double value, double tol) {
  s.measured[key] = {{"value", json_number(value)}, {"tolerance", tol}};
  if (!(std::abs(value) < tol)) s.status = "fail";
}

void skip(Suite& s, const std::string& why) {
  s.status = "skipped";
  s.note = why;
}

}  // namespace

Output cmd_validate(const Common& c) {
  const ModelParams pq = make_params(c.p, c.q);
  require_json(c, "validate");
  const ProfileOptions opts = profile_options(c);
  const StabilityClass cls = classify(pq);
  const bool closed = closed_form_case(pq);
  const bool subcritical = pq.q < 5.0;
  std::vector<Suite> suites;

  suites.push_back(run_suite("profile_closed_form", [&](Suite& s) {
    if (!closed) return skip(s, "closed form needs q = 2p - 1");
    for (double w : {0.0, 0.01, 0.1}) {
      const ProfileEvaluator ev(pq, w, opts);
      double err = 0.0;
      for (int i = 0; i <= 200; ++i) {
        const double x = 0.1 * i;
        err = std::max(err, std::abs(ev.phi(x) - phi_closed_form(x, w, pq)));
      }
      std::ostringstream key;
      key << "sup_error_omega_" << w;
      check(s, key.str(), err, 1e-8);
    }
  }));

  suites.push_back(run_suite("profile_stationary_equation", [&](Suite& s) {
    const ProfileEvaluator ev(pq, 0.0, opts);
    const double h = 1e-4;
    double worst = 0.0;
    for (int i = 1; i <= 100; ++i) {
      const double x = 0.1 * i;
      const double phi = ev.phi(x);
      const double pp = (ev.phi_prime(x + h) - ev.phi_prime(x - h)) / (2 * h);
      worst = std::max(worst, std::abs(pp - std::pow(phi, pq.p) + std::pow(phi, pq.q)));
    }
    check(s, "sup_residual", worst, 1e-6);
  }));

  suites.push_back(run_suite("eta_closed_form", [&](Suite& s) {
    if (!closed) return skip(s, "closed form needs q = 2p - 1");
    const EtaZero e = make_eta_zero(pq, opts);
    double err = 0.0;
    for (int i = 0; i <= 500; ++i) {
      const double x = 0.1 * i;
      const double ref = eta0_closed_form(x, pq);
      err = std::max(err, std::abs(eta0(x, e) - ref) / std::abs(ref));
    }
    check(s, "max_relative_error", err, 1e-6);
  }));

  suites.push_back(run_suite("eta_linearized_residual", [&](Suite& s) {
    const EtaZero e = make_eta_zero(pq, opts);
    std::vector<double> xs;
    for (int i = 0; i < 100; ++i) xs.push_back(0.1 + 0.1 * i);
    check(s, "sup_residual", residual_linearized(xs, e), 1e-4);
  }));

  suites.push_back(run_suite("decay_exponents", [&](Suite& s) {
    const EtaZero e = make_eta_zero(pq, opts);
    const double expected = -2.0 / (pq.p - 1.0);
    check(s, "phi0_slope_error", decay_exponent_phi(e.profile0, 100.0) - expected, 0.05);
    const EtaDecayFit fit = decay_exponent_eta(e, 100.0);
    check(s, "eta0_slope_error", fit.exponent - (expected + 2.0), 0.05);
    s.measured["eta0_sign_at_end"] = fit.sign;
    if (fit.sign >= 0 || fit.rejected) s.status = "fail";
  }));

  suites.push_back(run_suite("mass_prime_vs_fd", [&](Suite& s) {
    for (double w : {0.1, 0.5}) {
      const double f = mass_prime(w, pq, opts).value;
      const double d = mass_prime_fd(w, 1e-4, pq, opts);
      std::ostringstream key;
      key << "relative_gap_omega_" << w;
      check(s, key.str(), (f - d) / std::max(std::abs(f), 1e-2), 1e-4);
    }
  }));

  suites.push_back(run_suite("mass_prime_sign", [&](Suite& s) {
    const MassDerivative m = mass_prime(0.0, pq, opts);
    s.measured["mass_prime0"] = mass_derivative_json(m);
    s.measured["class"] = std::string(to_string(cls.tag));
    bool ok = false;
    switch (cls.tag) {
      case StabilityTag::MassDerivPositive: ok = !m.minus_infinity && m.value > 0; break;
      case StabilityTag::MassDerivZero: ok = !m.minus_infinity && std::abs(m.value) < 1e-5; break;
      case StabilityTag::MassDerivNegativeFinite: ok = !m.minus_infinity && m.value < 0; break;
      case StabilityTag::MassDerivMinusInfinity: ok = m.minus_infinity; break;
    }
    if (!ok) s.status = "fail";
  }));

  suites.push_back(run_suite("pairing_identity", [&](Suite& s) {
    const MassDerivative m = mass_prime(0.0, pq, opts);
    const MassDerivative pr = pairing_integral(make_eta_zero(pq, opts));
    if (m.minus_infinity || pr.minus_infinity) {
      s.measured["mass_prime0"] = mass_derivative_json(m);
      s.measured["pairing"] = mass_derivative_json(pr);
      if (m.minus_infinity != pr.minus_infinity) s.status = "fail";
      return;
    }
    check(s, "gap", (m.value - pr.value) / std::max(1.0, std::abs(m.value)), 1e-5);
  }));

  suites.push_back(run_suite("unstable_direction", [&](Suite& s) {
    if (!mass_derivative_negative(cls)) return skip(s, "mass derivative at omega = 0 is not negative");
    if (!subcritical) return skip(s, "needs q < 5");
    const UnstableSearch found = find_unstable_direction(pq);
    const EtaZero e = make_eta_zero(pq, opts);
    s.measured["R_star"] = found.R_star;
    s.measured["total"] = found.report.total;
    if (!(found.report.total < 0.0)) s.status = "fail";
    check(s, "orthogonality_defect", found.report.orthogonality_defect, kOrthogonalityTol);
    const double direct = quadform_direct(found.report, e);
    check(s, "direct_quadrature_gap", (found.report.total - direct) / std::abs(direct), 1e-4);
  }));

  suites.push_back(run_suite("evolve_conservation", [&](Suite& s) {
    if (!subcritical) return skip(s, "needs q < 5");
    GridOptions g;
    g.L = 100.0 * characteristic_length(pq);
    g.n = 1u << 12;
    FieldState st = init_state(pq, 0.0, g.L / 5.0, g);
    const GridProfile ref = sample_profile(pq, 0.0, st);
    const double rate = stationary_defect_rate(st, 0.0);
    run(st, 1.0, 1000, ref);
    const EvolveSample& a = st.history.front();
    const EvolveSample& b = st.history.back();
    check(s, "charge_drift", (b.charge - a.charge) / a.charge, 1e-10);
    check(s, "energy_drift", (b.energy - a.energy) / std::max(std::abs(a.energy), 1e-3), 1e-6);
    s.measured["stationary_defect_rate"] = rate;
    check(s, "distance_over_floor", b.modulation_distance / (2.0 * rate * b.t), 1.0);
  }));

  bool passed = true;
  json arr = json::array();
  for (const Suite& s : suites) {
    if (s.status == "fail") passed = false;
    json j = {{"name", s.name}, {"status", s.status}, {"measured", s.measured}};
    if (!s.note.empty()) j["note"] = s.note;
    arr.push_back(std::move(j));
  }
  Output o;
  o.document = {{"command", "validate"},
                {"p", pq.p},
                {"q", pq.q},
                {"class", std::string(to_string(cls.tag))},
                {"passed", passed},
                {"suites", arr}};
  o.exit_code = passed ? 0 : 3;
  return o;
}

}  // namespace dpnls::cli
