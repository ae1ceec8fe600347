#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dpnls/quadrature.hpp"
#include "dpnls/roots.hpp"

using namespace dpnls;

TEST_CASE("gk21 is exact for degree-31 polynomials") {
  auto f = [](double x) { return std::pow(x, 30) + 3 * x * x; };
  const auto pan = quad::gk21(f, 0.0, 1.0);
  CHECK(pan.value == doctest::Approx(1.0 / 31.0 + 1.0).epsilon(1e-15));
}

TEST_CASE("adaptive integration matches tanh-sinh on an endpoint cusp") {
  auto f = [](double x) { return std::sqrt(x) * std::log(x + 1e-300); };
  const auto r = quad::integrate(f, 0.0, 1.0);
  boost::math::quadrature::tanh_sinh<double> ts;
  const double ref = ts.integrate([](double x) { return std::sqrt(x) * std::log(x); }, 0.0, 1.0);
  CHECK(r.value == doctest::Approx(ref).epsilon(1e-11));
  CHECK(r.value == doctest::Approx(-4.0 / 9.0).epsilon(1e-11));
}

TEST_CASE("breakpoints and failure reporting") {
  auto kink = [](double x) { return std::abs(x - 0.3); };
  const std::array<double, 3> pts{0.0, 0.3, 1.0};
  CHECK(quad::integrate(kink, std::span<const double>(pts)).intervals == 2);
  quad::Options opt;
  opt.max_intervals = 3;
  auto wild = [](double x) { return std::sin(1.0 / (x + 1e-4)); };
  CHECK_THROWS_AS(quad::integrate(wild, 0.0, 1.0, opt), NumericalError);
}

TEST_CASE("bracketed newton") {
  auto fdf = [](double x) { return std::pair{std::cos(x) - x, -std::sin(x) - 1}; };
  const auto r = roots::bracketed_newton(fdf, 0.0, 1.0, 0.5, 1e-15);
  CHECK(r.x == doctest::Approx(0.7390851332151607).epsilon(1e-15));
  auto bad = [](double x) { return std::pair{x * x + 1, 2 * x}; };
  CHECK_THROWS_AS(roots::bracketed_newton(bad, 0.0, 1.0, 0.5, 1e-15), NumericalError);
}
