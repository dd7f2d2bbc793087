// Model layer: generalized Gierer-Meinhardt family, structural assumptions
// (S1)/(S2), analytic partial derivatives, domain handling.
#include "pulsespec/model.hpp"

#include <doctest.h>

#include <cmath>

using namespace pspec;

namespace {

// Central finite difference of a scalar component of the nonlinearities.
double fd(const std::function<double(double)>& g, double x, double h = 1e-6) {
  return (g(x + h) - g(x - h)) / (2.0 * h);
}

GMParams center_params() {
  GMParams p;
  p.slow_type = GMSlowType::center;
  p.mu = 1.0;
  return p;
}

}  // namespace

TEST_CASE("gm family values match the formulas") {
  GMParams p;  // alpha1 = 0, alpha2 = 2, beta1 = beta2 = 2, saddle f = mu*u
  p.mu = 0.7;
  ModelSpec model = make_gm_model(p);
  REQUIRE(model.m == 1);
  REQUIRE(model.n == 1);

  Vec u = Vec::Constant(1, 1.3), v = Vec::Constant(1, 0.4);
  NonlinearityValues nl = model.eval(u, v, 0.0);
  CHECK(nl.H1[0] == doctest::Approx(0.7 * 1.3).epsilon(1e-14));
  CHECK(nl.H2[0] == doctest::Approx(-0.4 * 0.4).epsilon(1e-14));
  CHECK(nl.G[0] == doctest::Approx(0.4 - 1.3 * 1.3 * 0.4 * 0.4).epsilon(1e-14));
}

TEST_CASE("assumption S1 holds exactly at v = 0") {
  ModelSpec model = make_gm_model(center_params());
  for (double uu : {0.3, 1.0, 2.5}) {
    NonlinearityValues nl = model.eval(Vec::Constant(1, uu), Vec::Zero(1), 0.0);
    CHECK(nl.H2[0] == 0.0);  // exact zeros, not approximate
    CHECK(nl.G[0] == 0.0);
    // dH2/du(u, 0) need not vanish in general but does for beta1 >= 1;
    // dG/dv(u,0,0) is the fast linearization coefficient (here 1).
    CHECK(nl.dG_dv(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("partial derivatives agree with finite differences") {
  GMParams p;
  p.alpha1 = 1.0;
  p.beta1 = 3;
  p.alpha2 = 2.0;
  p.beta2 = 2;
  p.slow_type = GMSlowType::sine;
  ModelSpec model = make_gm_model(p);

  const double u0 = 1.2, v0 = 0.8;
  NonlinearityValues nl = model.eval(Vec::Constant(1, u0), Vec::Constant(1, v0), 0.0);

  auto H1u = [&](double x) { return model.eval(Vec::Constant(1, x), Vec::Constant(1, v0), 0.0).H1[0]; };
  auto H2u = [&](double x) { return model.eval(Vec::Constant(1, x), Vec::Constant(1, v0), 0.0).H2[0]; };
  auto H2v = [&](double x) { return model.eval(Vec::Constant(1, u0), Vec::Constant(1, x), 0.0).H2[0]; };
  auto Gu = [&](double x) { return model.eval(Vec::Constant(1, x), Vec::Constant(1, v0), 0.0).G[0]; };
  auto Gv = [&](double x) { return model.eval(Vec::Constant(1, u0), Vec::Constant(1, x), 0.0).G[0]; };

  CHECK(nl.dH1_du(0, 0) == doctest::Approx(fd(H1u, u0)).epsilon(1e-7));
  CHECK(nl.dH2_du(0, 0) == doctest::Approx(fd(H2u, u0)).epsilon(1e-7));
  CHECK(nl.dH2_dv(0, 0) == doctest::Approx(fd(H2v, v0)).epsilon(1e-7));
  CHECK(nl.dG_du(0, 0) == doctest::Approx(fd(Gu, u0)).epsilon(1e-7));
  CHECK(nl.dG_dv(0, 0) == doctest::Approx(fd(Gv, v0)).epsilon(1e-7));
}

TEST_CASE("h2_scale = 0 switches the semi-strong coupling off") {
  GMParams p = center_params();
  p.h2_scale = 0.0;
  ModelSpec model = make_gm_model(p);
  NonlinearityValues nl = model.eval(Vec::Constant(1, 1.1), Vec::Constant(1, 0.9), 0.0);
  CHECK(nl.H2[0] == 0.0);
  CHECK(nl.dH2_du(0, 0) == 0.0);
  CHECK(nl.dH2_dv(0, 0) == 0.0);
}

TEST_CASE("validate_model passes the built-in family and flags broken models") {
  ValidationReport ok = validate_model(make_gm_model(center_params()), 64);
  CHECK(ok.ok());

  // Violating (S1): a G with nonzero value at v = 0.
  ModelSpec broken = make_gm_model(center_params());
  auto base = broken.eval;
  broken.eval = [base](const Vec& u, const Vec& v, double eps) {
    NonlinearityValues nl = base(u, v, eps);
    nl.G[0] += 0.1;
    return nl;
  };
  ValidationReport bad = validate_model(broken, 64);
  CHECK_FALSE(bad.ok());
  bool flagged_s1 = false;
  for (const auto& viol : bad.violations) flagged_s1 |= (viol.assumption == "S1");
  CHECK(flagged_s1);
}

TEST_CASE("evaluation outside domain_box raises a domain error") {
  ModelSpec model = make_gm_model(center_params());
  Vec u_far = Vec::Constant(1, model.domain_box.u_hi[0] + 1.0);
  CHECK_THROWS_AS(eval_nonlinearities(model, u_far, Vec::Zero(1), 0.0), Error);
  try {
    eval_nonlinearities(model, u_far, Vec::Zero(1), 0.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::domain);
  }
}

TEST_CASE("dimension mismatch raises a config error") {
  ModelSpec model = make_gm_model(center_params());
  CHECK_THROWS_AS(eval_nonlinearities(model, Vec::Zero(2), Vec::Zero(1), 0.0), Error);
}

TEST_CASE("fractional u-exponents restrict the domain to u > 0") {
  GMParams p = center_params();
  p.alpha2 = 1.5;
  ModelSpec model = make_gm_model(p);
  CHECK(model.domain_box.u_lo[0] > 0.0);
}

TEST_CASE("normalized center frame rescales H1 to -u and H2 by 1/sqrt(mu)") {
  GMParams p = center_params();
  p.mu = 4.0;
  ModelSpec plain = make_gm_model(p);
  ModelSpec normal = make_gm_center_normalized(p);
  Vec u = Vec::Constant(1, 0.9), v = Vec::Constant(1, 0.5);
  NonlinearityValues a = plain.eval(u, v, 0.0);
  NonlinearityValues b = normal.eval(u, v, 0.0);
  CHECK(b.H1[0] == doctest::Approx(a.H1[0] / 4.0).epsilon(1e-14));
  CHECK(b.H2[0] == doctest::Approx(a.H2[0] / 2.0).epsilon(1e-14));
  CHECK(b.G[0] == doctest::Approx(a.G[0]).epsilon(1e-14));
}
