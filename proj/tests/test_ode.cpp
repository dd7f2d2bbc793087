// Integrator and Hermite-table layer: accuracy against closed-form flows,
// both directions of time, observer contract, resampling.
#include "pulsespec/ode.hpp"

#include <doctest.h>

#include <cmath>

using namespace pspec;

TEST_CASE("scalar exponential flow to requested tolerance") {
  OdeOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  auto rhs = [](double, const Vec& y) { return Vec::Constant(1, -2.0) .cwiseProduct(y); };
  Vec y0 = Vec::Constant(1, 3.0);
  Vec y1 = integrate_ode(rhs, 0.0, 2.5, y0, opt);
  CHECK(y1[0] == doctest::Approx(3.0 * std::exp(-5.0)).epsilon(1e-8));
}

TEST_CASE("harmonic oscillator, forward and backward") {
  OdeOptions opt;
  opt.rtol = 1e-11;
  opt.atol = 1e-13;
  auto rhs = [](double, const Vec& y) {
    Vec dy(2);
    dy << y[1], -y[0];
    return dy;
  };
  Vec y0(2);
  y0 << 1.0, 0.0;
  const double T = 7.3;
  Vec yf = integrate_ode(rhs, 0.0, T, y0, opt);
  CHECK(yf[0] == doctest::Approx(std::cos(T)).epsilon(1e-9));
  CHECK(yf[1] == doctest::Approx(-std::sin(T)).epsilon(1e-9));
  // Backward from the endpoint recovers the initial condition.
  Vec yb = integrate_ode(rhs, T, 0.0, yf, opt);
  CHECK(yb[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(yb[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
}

TEST_CASE("complex matrix-valued state integrates like the matrix exponential") {
  OdeOptions opt;
  opt.rtol = 1e-11;
  opt.atol = 1e-13;
  CMat A(2, 2);
  A << Cplx(0.0, 1.0), Cplx(0.3, 0.0), Cplx(-0.2, 0.1), Cplx(0.0, -0.5);
  auto rhs = [&](double, const CMat& Y) -> CMat { return A * Y; };
  CMat Y1 = integrate_ode(rhs, 0.0, 1.0, CMat(CMat::Identity(2, 2)), opt);
  // Oracle: scaling-and-squaring on the Taylor series (A is small).
  CMat E = CMat::Identity(2, 2), term = CMat::Identity(2, 2);
  for (int k = 1; k < 30; ++k) {
    term = term * A / static_cast<double>(k);
    E += term;
  }
  CHECK((Y1 - E).norm() < 1e-9);
}

TEST_CASE("observer sees the initial point and ascending accepted steps") {
  OdeOptions opt;
  auto rhs = [](double, const Vec& y) { return y; };
  std::vector<double> xs;
  std::function<void(double, const Vec&, const Vec&)> obs =
      [&](double x, const Vec&, const Vec&) { xs.push_back(x); };
  integrate_ode(rhs, 0.0, 1.0, Vec(Vec::Ones(1)), opt, nullptr, obs);
  REQUIRE(!xs.empty());
  CHECK(xs.front() == 0.0);
  CHECK(xs.back() == doctest::Approx(1.0));
  for (size_t i = 1; i < xs.size(); ++i) CHECK(xs[i] > xs[i - 1]);
}

TEST_CASE("hermite table reproduces a smooth trajectory between nodes") {
  OdeOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-12;
  auto rhs = [](double x, const Vec& y) {
    Vec dy(1);
    dy << std::cos(x) * y[0];
    return dy;
  };
  std::vector<double> xs;
  std::vector<Vec> ys, dys;
  std::function<void(double, const Vec&, const Vec&)> obs =
      [&](double x, const Vec& y, const Vec& dy) {
        xs.push_back(x);
        ys.push_back(y);
        dys.push_back(dy);
      };
  integrate_ode(rhs, 0.0, 6.0, Vec(Vec::Ones(1)), opt, nullptr, obs);
  HermiteTable<Vec> table = make_hermite_table(std::move(xs), std::move(ys), std::move(dys));
  // y(x) = exp(sin x); probe off-node points.
  for (double x : {0.37, 1.91, 3.14, 5.55}) {
    CHECK(table.eval(x)[0] == doctest::Approx(std::exp(std::sin(x))).epsilon(1e-7));
    CHECK(table.eval_derivative(x)[0] ==
          doctest::Approx(std::cos(x) * std::exp(std::sin(x))).epsilon(1e-5));
  }
  // Clamped past the ends.
  CHECK(table.eval(-1.0)[0] == doctest::Approx(1.0));
}

TEST_CASE("make_hermite_table reverses descending observer output") {
  std::vector<double> xs{2.0, 1.0, 0.0};
  std::vector<Vec> ys{Vec::Constant(1, 4.0), Vec::Constant(1, 1.0), Vec::Constant(1, 0.0)};
  std::vector<Vec> dys{Vec::Constant(1, 4.0), Vec::Constant(1, 2.0), Vec::Constant(1, 0.0)};
  HermiteTable<Vec> t = make_hermite_table(std::move(xs), std::move(ys), std::move(dys));
  CHECK(t.x.front() == 0.0);
  CHECK(t.x.back() == 2.0);
  CHECK(t.eval(1.0)[0] == doctest::Approx(1.0));  // x^2 sampled with exact slopes
  CHECK(t.eval(1.5)[0] == doctest::Approx(2.25).epsilon(1e-12));
}

TEST_CASE("max step budget raises a solver error") {
  OdeOptions opt;
  opt.max_steps = 10;
  auto rhs = [](double, const Vec& y) {
    Vec dy(1);
    dy << std::sin(100.0 * y[0]) * 50.0 + 1.0;
    return dy;
  };
  CHECK_THROWS_AS(integrate_ode(rhs, 0.0, 100.0, Vec(Vec::Zero(1)), opt), Error);
}

TEST_CASE("uniform_grid endpoints and spacing") {
  std::vector<double> g = uniform_grid(-1.0, 2.0, 7);
  REQUIRE(g.size() == 7);
  CHECK(g.front() == -1.0);
  CHECK(g.back() == 2.0);
  for (size_t i = 1; i < g.size(); ++i)
    CHECK(g[i] - g[i - 1] == doctest::Approx(0.5).epsilon(1e-12));
}
