#include <cmath>
#include <vector>

#include "doctest.h"
#include "dpnls/errors.hpp"
#include "dpnls/eta.hpp"

using namespace dpnls;

namespace {

// hand evaluation of the closed form at p = 2 and p = 3 (x = 0, 1)
constexpr double kEtaP2X1 = 0.5413223140495866;  // (1/3)(144/121)(81/32 - 9/8 - 1/24)
constexpr double kEtaP3X0 = 0.816496580927726;   // (1/8)(3/2)^{3/2}(256/72)

}  // namespace

TEST_CASE("eta0 spot values") {
  const EtaZero e = make_eta_zero({2.0, 3.0});
  CHECK(eta0(0.0, e) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(eta0(1.0, e) == doctest::Approx(kEtaP2X1).epsilon(1e-10));
  CHECK(eta0(-1.0, e) == eta0(1.0, e));
  CHECK(eta0(1e4, e) == doctest::Approx(-0.5).epsilon(1e-5));
  CHECK(eta0_closed_form(1.0, {2.0, 3.0}) == doctest::Approx(kEtaP2X1).epsilon(1e-15));
  CHECK(eta0_closed_form(0.0, {3.0, 5.0}) == doctest::Approx(kEtaP3X0).epsilon(1e-14));
  CHECK_THROWS_AS(eta0_closed_form(0.0, {2.0, 3.5}), PreconditionError);
}

TEST_CASE("eta0 matches the closed form on [0, 50]") {
  for (double p : {1.5, 2.0, 3.0}) {
    const ModelParams pq{p, 2 * p - 1};
    const EtaZero e = make_eta_zero(pq);
    double worst = 0.0;
    for (int i = 0; i <= 500; ++i) {
      const double x = 0.1 * i;
      const double ref = eta0_closed_form(x, pq);
      worst = std::max(worst, std::abs(eta0(x, e) - ref) / (1.0 + std::abs(ref)));
    }
    INFO("p=" << p);
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("eta0_prime against differences of the closed form") {
  for (double p : {1.5, 2.0, 3.0}) {
    const ModelParams pq{p, 2 * p - 1};
    const EtaZero e = make_eta_zero(pq);
    for (double x : {1e-6, 1e-3, 0.5, 1.0, 4.0, 30.0}) {
      const double h = 1e-4 * std::max(1.0, x);
      const double fd = (eta0_closed_form(x + h, pq) - eta0_closed_form(x - h, pq)) / (2 * h);
      INFO("p=" << p << " x=" << x);
      CHECK(std::abs(eta0_prime(x, e) - fd) < 1e-7 * (1.0 + std::abs(fd)));
    }
    CHECK(eta0_prime(0.0, e) == 0.0);
    CHECK(eta0_prime(-1.0, e) == -eta0_prime(1.0, e));
  }
  const EtaZero e2 = make_eta_zero({2.0, 3.0});
  CHECK(eta0_prime(1.0, e2) == doctest::Approx(-1.3523).epsilon(1e-4));
}

TEST_CASE("eta0_prime growth bound") {
  for (double p : {1.5, 2.2, 3.0}) {
    const EtaZero e = make_eta_zero({p, p + 1.0});
    double lo = INFINITY, hi = 0.0;
    for (double x = 10.0; x <= 1000.0; x *= 1.5) {
      const double s = std::abs(eta0_prime(x, e)) * std::pow(x, 2.0 / (p - 1.0) - 1.0);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    INFO("p=" << p);
    CHECK(hi < 10.0 * lo + 1.0);
    CHECK(std::isfinite(hi));
  }
}

TEST_CASE("linearized equation residual") {
  std::vector<double> grid;
  for (int i = 0; i <= 99; ++i) grid.push_back(0.1 + 0.1 * i);
  CHECK(residual_linearized(grid, make_eta_zero({2.0, 3.0})) < 1e-5);
  CHECK(residual_linearized(grid, make_eta_zero({2.2, 3.4})) < 1e-4);
  const ModelParams pq{2.0, 3.0};
  const ProfileEvaluator ev(pq, 0.0);
  const double zero_eta = residual_linearized(
      grid, pq, [&](double x) { return ev.phi(x); }, [](double) { return 0.0; });
  CHECK(zero_eta == doctest::Approx(ev.phi(0.1)).epsilon(1e-12));
  CHECK_THROWS_AS(residual_linearized(std::vector<double>{0.0}, make_eta_zero(pq)),
                  PreconditionError);
}

TEST_CASE("decay exponents of eta0") {
  struct Case { double p, q, expected; };
  for (const Case c : {Case{3.0, 4.0, 1.0}, Case{2.0, 3.0, 0.0}, Case{1.5, 2.0, -2.0}}) {
    const EtaDecayFit fit = decay_exponent_eta(make_eta_zero({c.p, c.q}), 100.0);
    INFO("p=" << c.p);
    CHECK_FALSE(fit.rejected);
    CHECK(fit.sign == -1);
    CHECK(fit.exponent == doctest::Approx(c.expected).epsilon(0.05).scale(1.0));
  }
}

TEST_CASE("difference quotients converge to eta0") {
  const ModelParams pq{2.0, 3.0};
  const EtaZero e = make_eta_zero(pq);
  CHECK(std::abs(eta_fd(0.0, 1e-3, pq) - 1.5) < 5e-3);
  for (double x : {0.0, 1.0, 2.0, 5.0}) {
    double prev = INFINITY;
    for (double w : {1e-2, 1e-3, 1e-4}) {
      const double d = std::abs(eta_fd(x, w, pq) - eta0(x, e));
      CHECK(d < prev);
      prev = d;
    }
  }
  CHECK_THROWS_AS(eta_fd(1.0, 0.0, pq), PreconditionError);
}
