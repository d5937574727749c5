#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

#include <bapqp/prox.hpp>

#include <cmath>
#include <functional>

using namespace bapqp;
using bapqp::test::vec;

using bapqp::test::bisect;
using bapqp::test::golden;

TEST_CASE("cone projections") {
  CHECK(project_cone(Cone::nonneg(2), vec({-1, 2})) == vec({0, 2}));
  CHECK(project_cone(Cone::box(vec({0, 0}), vec({1, 1})), vec({2, -3})) == vec({1, 0}));
  CHECK(project_cone(Cone::free(2), vec({-4, 5})) == vec({-4, 5}));
}

TEST_CASE("prox of simple terms") {
  ProxResult z = prox_theta(SeparableFunction::zero(2), 1.0, vec({5, -1}));
  CHECK(z.point == vec({5, -1}));
  CHECK(z.newton_iterations == 0);
  CHECK(prox_theta(SeparableFunction::l1(1, 1.0), 2.0, vec({3})).point[0] == doctest::Approx(1.0));
}

TEST_CASE("Kleinrock prox matches bisection") {
  const double c = 1.0, v = 0.9;
  const double t = prox_theta(SeparableFunction::kleinrock(vec({c})), 1.0, vec({v})).point[0];
  const double ref = bisect([&](double s) { return s - v + c / ((c - s) * (c - s)); }, 0.0,
                            c - 1e-12);
  CHECK(std::abs(t - ref) <= 1e-10);
}

TEST_CASE("BPR prox matches golden section and bisection") {
  auto th = SeparableFunction::bpr(vec({1.0}), vec({1.0}), 0.15, 4.0);
  const double v = 2.0;
  const double t = prox_theta(th, 1.0, vec({v})).point[0];
  // Golden section on values resolves the minimizer only to ~sqrt(eps).
  const double coarse = golden(
      [&](double s) { return th.value_at(0, s) + 0.5 * (s - v) * (s - v); }, 0.0, v);
  CHECK(std::abs(t - coarse) <= 1e-7);
  // Bisection on the stationarity condition 1 + 0.75 s^4 + s - v = 0.
  const double ref = bisect([&](double s) { return 1.0 + 0.75 * std::pow(s, 4) + s - v; }, 0.0, v);
  CHECK(std::abs(t - ref) <= 1e-8);
}

TEST_CASE("s-update kernel") {
  CHECK(moreau_theta_step(SeparableFunction::zero(3), 1.7, vec({1, -2, 3})) == Vector::Zero(3));
  CHECK(moreau_theta_step(SeparableFunction::l1(1, 1.0), 1.0, vec({0.5}))[0] ==
        doctest::Approx(-0.5));
}

TEST_CASE("Kleinrock s-update solves the conjugate prox problem") {
  // -s = argmin_u theta*(u)/sigma + 1/2 |u - a|^2.
  const double c = 2.0, sigma = 1.5;
  auto th = SeparableFunction::kleinrock(vec({c}));
  for (double a : {-1.0, 0.1, 0.4, 1.3, 3.0}) {
    const Vector s = moreau_theta_step(th, sigma, vec({a}));
    const Vector pt = prox_theta(th, sigma, vec({sigma * a})).point;
    CHECK(std::abs(a - (pt[0] / sigma - s[0])) <= 1e-12);
    auto f = [&](double u) {
      return conjugate_value(th, vec({u})) / sigma + 0.5 * (u - a) * (u - a);
    };
    // Grid then refine.
    double best = a, fbest = f(a);
    for (int k = -400; k <= 400; ++k) {
      const double u = a + 0.01 * k;
      if (f(u) < fbest) {
        fbest = f(u);
        best = u;
      }
    }
    const double u = golden(f, best - 0.02, best + 0.02);
    CHECK(std::abs(-s[0] - u) <= 1e-7);
  }
}

TEST_CASE("z-update kernel") {
  CHECK(moreau_cone_step(Cone::nonneg(2), 1.0, vec({2, -3})) == vec({0, 3}));
  CHECK(moreau_cone_step(Cone::free(2), 3.0, vec({2, -3})) == Vector::Zero(2));
  CHECK(moreau_cone_step(Cone::box(vec({0}), vec({1})), 2.0, vec({1}))[0] == doctest::Approx(-0.5));
}

TEST_CASE("scalar prox and derivative intervals agree with the vector prox") {
  auto th = SeparableFunction::bpr(vec({3.0, 1.0}), vec({0.5, 2.0}), 0.15, 4.0);
  const Vector v = vec({4.0, 1.0});
  const Vector p = prox_theta(th, 0.7, v).point;
  for (Index j = 0; j < 2; ++j) {
    CHECK(prox_scalar(th, j, 0.7, v[j]) == doctest::Approx(p[j]).epsilon(1e-14));
    // Optimality: (v - p)/sigma lies in the derivative interval at p.
    auto [lo, hi] = derivative_interval(th, j, p[j]);
    const double g = (v[j] - p[j]) / 0.7;
    if (p[j] > 0) CHECK(std::abs(g - lo) <= 1e-9 * (1 + std::abs(g)));
    else CHECK(g <= hi + 1e-12);
  }
  auto [l, r] = derivative_interval(SeparableFunction::l1(1, 2.0), 0, 0.0);
  CHECK(l == -2.0);
  CHECK(r == 2.0);
}
