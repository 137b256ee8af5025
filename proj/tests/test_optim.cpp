#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "semms/optim.hpp"

using namespace semms;

TEST_CASE("brent finds a quadratic minimum precisely") {
  const double x = brent_min([](double v) { return (v - 1.7) * (v - 1.7); },
                             0.0, 10.0, 1e-12);
  CHECK(x == doctest::Approx(1.7).epsilon(1e-9));
}

TEST_CASE("brent handles a boundary minimum") {
  const double x = brent_min([](double v) { return v; }, 0.0, 5.0, 1e-12);
  CHECK(x < 1e-6);
}

TEST_CASE("nelder-mead solves rosenbrock") {
  auto rosen = [](const Vec& v) {
    const double a = 1.0 - v(0);
    const double b = v(1) - v(0) * v(0);
    return a * a + 100.0 * b * b;
  };
  Vec x0(2);
  x0 << -1.2, 1.0;
  const auto res = nelder_mead(rosen, x0, 0.5, 1e-14, 5000);
  CHECK(res.fx < 1e-9);
  CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(res.x(1) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("nelder-mead in three dimensions") {
  auto bowl = [](const Vec& v) {
    return (v(0) - 1.0) * (v(0) - 1.0) + 2.0 * (v(1) + 0.5) * (v(1) + 0.5) +
           0.5 * std::abs(v(2)) * std::abs(v(2));
  };
  const auto res = nelder_mead(bowl, Vec::Zero(3), 0.3, 1e-13, 4000);
  CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(res.x(1) == doctest::Approx(-0.5).epsilon(1e-4));
  CHECK(std::abs(res.x(2)) < 1e-3);
}
